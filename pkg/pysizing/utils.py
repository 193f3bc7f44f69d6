"""Shared helpers: SPICE number notation, display-unit conversion, console
messages, path removal, and the package exception root."""
import os
import math
import re
import shutil
from decimal import Decimal, InvalidOperation


class PySizingError(Exception):
    """Root of every error raised by pysizing."""


class ConfigurationError(PySizingError):
    """Raised for invalid user configuration: groups, files, flags."""


########################
### SPICE number text ###
########################

# Scale strings are kept as text so that parsing through Decimal is exact:
# "10u", "10U" and "10e-6" all land on the same binary float.
spice_scale_dict = {
    't': '1e12',
    'g': '1e9',
    'meg': '1e6',
    'k': '1e3',
    'mil': '25.4e-6',
    'm': '1e-3',
    'u': '1e-6',
    'µ': '1e-6',
    'n': '1e-9',
    'p': '1e-12',
    'f': '1e-15',
    }

_spice_number_pattern = re.compile(
    r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"(meg|mil|[tgkmunpfµ])?([a-zµΩ]*)$", re.IGNORECASE)


def split_spice(text):
    """Splits a SPICE number into its mantissa text and scale suffix.

    Parameters
    ----------
    text : str
        A SPICE number such as '10u', '1.8', '4.7MEG' or '10pF'.

    Returns
    -------
    mantissa : str
        The numeric part, eg '10'.
    suffix : str
        The lower-case scale suffix, eg 'u', or '' when there is none.

    """
    mo = _spice_number_pattern.match(text.strip())
    if mo is None:
        raise ValueError("{0!r} is not a SPICE number.".format(text))
    mantissa, suffix = mo.group(1), (mo.group(2) or '').lower()
    # A bare trailing unit letter such as the 'F' in '1F' is a scale (femto)
    # per SPICE rules, so nothing more to untangle here.
    return mantissa, suffix


def from_spice(text):
    """Converts SPICE number text to a float in SI units.

    Parameters
    ----------
    text : str or number
        SPICE number text, eg '0.18u', '1k', '10e-6', or a plain number.

    Returns
    -------
    value : float
        Value in SI base units.

    """
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    mantissa, suffix = split_spice(str(text))
    try:
        value = Decimal(mantissa)
    except InvalidOperation:
        raise ValueError("{0!r} is not a SPICE number.".format(text))
    if suffix:
        value = value * Decimal(spice_scale_dict[suffix])
    return float(value)


def to_spice(value, suffix=''):
    """Formats an SI value as SPICE number text in the given suffix style.

    Parameters
    ----------
    value : float
        Value in SI base units.
    suffix : str, optional
        Scale suffix to express the value in, eg 'u'.  An empty suffix writes
        the plain number.

    Returns
    -------
    text : str
        eg to_spice(53e-6, 'u') == '53u'.

    """
    scaled = Decimal(repr(float(value)))
    if suffix:
        scaled = scaled / Decimal(spice_scale_dict[suffix.lower()])
    text = '{0:.12g}'.format(float(scaled))
    return text + suffix


_eng_suffixes = ('t', 'g', 'meg', 'k', 'm', 'u', 'n', 'p', 'f')


def to_eng(value):
    """SPICE number text with the suffix that keeps the mantissa in [1, 1000),
    eg to_eng(4e-6) == '4u'.  Values from 0.01 to 1000 stay plain."""
    mag = abs(float(value))
    if mag == 0.0 or 0.01 <= mag < 1e3 or not math.isfinite(mag):
        return to_spice(value)
    for suffix in _eng_suffixes:
        if mag >= float(spice_scale_dict[suffix]) * (1 - 1e-12):
            return to_spice(value, suffix)
    return to_spice(value, 'f')


display_conv_dict = {
    '': 1.0,
    'db': 1.0,
    'deg': 1.0,
    'degree': 1.0,
    'degrees': 1.0,
    'v': 1.0,
    'mv': 1e-3,
    'uv': 1e-6,
    'w': 1.0,
    'mw': 1e-3,
    'uw': 1e-6,
    'a': 1.0,
    'ma': 1e-3,
    'ua': 1e-6,
    'hz': 1.0,
    'khz': 1e3,
    'mhz': 1e6,
    'ghz': 1e9,
    'f': 1.0,
    'pf': 1e-12,
    'nf': 1e-9,
    'ohm': 1.0,
    'kohm': 1e3,
    'megohm': 1e6,
    'm': 1.0,
    'um': 1e-6,
    'nm': 1e-9,
    's': 1.0,
    'ms': 1e-3,
    'us': 1e-6,
    'ns': 1e-9,
    }


def to_si(value, units):
    """Converts a value given in display units to SI base units.

    Parameters
    ----------
    value : number
        Value in [units].
    units : str
        Units flag, eg 'MHz', 'mW', 'mV', 'dB'.

    Returns
    -------
    si_value : float
        Value in SI base units (dB and degrees pass through).

    """
    return value * display_conv_dict[units.lower()]


def from_si(value, units):
    """Inverse of :func:`to_si`."""
    return value / display_conv_dict[units.lower()]


#########################
### message functions ###
#########################

USE_COLOR = (os.name == 'posix')


def message(s):
    """Formats a message for printing.  If on a posix system the message will
    be in color.

    """
    head = "\033[1;32m" if USE_COLOR else "*** MESSAGE ***: "
    tail = "\033[0m" if USE_COLOR else ""
    msg = head + s + tail
    return msg


def failure(s):
    """Formats a fail message for printing.  If on a posix system the message
    will be in color.

    """
    head = "\033[1;31m" if USE_COLOR else "*** FAILURE ***: "
    tail = "\033[0m" if USE_COLOR else ""
    msg = head + s + tail
    return msg


def scrub(text, env_names, environ=None):
    """Replaces the values of the named environment variables in text with
    ``${NAME}`` placeholders.  ``environ`` defaults to os.environ.

    """
    if not text:
        return text
    environ = os.environ if environ is None else environ
    for name in env_names:
        secret = environ.get(name)
        if secret:
            text = text.replace(secret, "${" + name + "}")
    return text


##################################
### Path manipulation routines ###
##################################

def remove(path):
    """Removes a path, or recursively a directory, or does nothing
    if path is neither a file nor a directory.

    """
    if os.path.isfile(path):
        os.remove(path)
    elif os.path.isdir(path):
        shutil.rmtree(path)
    else:
        pass


def ensure_dir(path):
    """Creates a directory (and parents) if it does not exist; returns path."""
    if not os.path.isdir(path):
        os.makedirs(path)
    return path
