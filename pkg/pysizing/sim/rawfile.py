"""Reader for SPICE ASCII raw files.

An ASCII raw file is a sequence of plots, each a header of ``Key: value`` lines
followed by a ``Variables:`` table and a ``Values:`` section.  In the values
section every point starts with its index followed by one number per
variable; AC plots write each number as ``re,im``.  The first variable is the
sweep (time, frequency or the swept source).
"""
import re
import logging
from collections import OrderedDict, namedtuple

import numpy as np

from pysizing.sim.errors import ParseFailure

logger = logging.getLogger(__name__)

_token_pattern = re.compile(r"\S+")
_header_pattern = re.compile(r"^([A-Za-z][A-Za-z. ]*):\s*(.*)$")


class Waveform(namedtuple('Waveform', ['name', 'sweep', 'values'])):
    """One signal against the sweep variable.  ``values`` is complex only for
    AC plots."""
    __slots__ = ()

    @property
    def is_complex(self):
        return np.iscomplexobj(self.values)

    def __len__(self):
        return len(self.sweep)

    def at(self, x):
        """Value linearly interpolated at sweep position x."""
        if self.is_complex:
            return complex(np.interp(x, self.sweep, self.values.real) +
                           1j * np.interp(x, self.sweep, self.values.imag))
        return float(np.interp(x, self.sweep, self.values))


def make_waveform(name, sweep, values):
    """Builds a Waveform with a strictly increasing sweep.

    Points whose abscissa does not advance past every earlier point (the
    duplicated time points some engines emit at breakpoints) are dropped; a
    wholly decreasing sweep is reversed.
    """
    sweep = np.asarray(sweep, dtype='f8')
    values = np.asarray(values)
    if len(sweep) != len(values):
        raise ValueError("sweep and values differ in length for {0}".format(name))
    if len(sweep) > 1 and np.all(np.diff(sweep) < 0):
        sweep, values = sweep[::-1], values[::-1]
    if len(sweep) > 1 and not np.all(np.diff(sweep) > 0):
        keep = np.ones(len(sweep), dtype=bool)
        running = sweep[0]
        for i in range(1, len(sweep)):
            if sweep[i] > running:
                running = sweep[i]
            else:
                keep[i] = False
        sweep, values = sweep[keep], values[keep]
    return Waveform(name, sweep, values)


def canonical_name(name):
    """Canonical lower-case signal name: node voltages as ``v(node)`` and
    source branch currents as ``i(source)``."""
    name = name.strip().lower()
    if name.endswith('#branch'):
        return 'i({0})'.format(name[:-len('#branch')])
    if '(' in name:
        return name
    if name in ('time', 'frequency', 'v-sweep', 'i-sweep', 'temp-sweep'):
        return name
    return 'v({0})'.format(name)


class Plot(namedtuple('Plot', ['title', 'plotname', 'flags', 'sweep_name', 'sweep',
                               'signals'])):
    """A parsed plot.  ``signals`` maps canonical name to sample array."""
    __slots__ = ()

    @property
    def npoints(self):
        return len(self.sweep)

    def waveforms(self):
        """Waveform per signal, sweep made strictly monotonic."""
        return OrderedDict((name, make_waveform(name, self.sweep, values))
                           for name, values in self.signals.items())

    def op_point(self):
        """Single-point plots as a name -> real value map."""
        return OrderedDict((name, float(np.real(values[0])))
                           for name, values in self.signals.items())


def _parse_number(token, is_complex, offset):
    try:
        if is_complex:
            re_, _, im = token.partition(',')
            return complex(float(re_), float(im) if im else 0.0)
        return float(token)
    except ValueError:
        raise ParseFailure("bad number {0!r}".format(token), offset)


def _parse_block(tokens, is_complex, offset_of):
    """Converts a (points, variables) array of number text, falling back to a
    point-by-point pass only to locate a bad token."""
    try:
        if is_complex:
            parts = np.char.partition(tokens, ',')
            re_ = parts[..., 0].astype('f8')
            im = np.where(parts[..., 2] == '', '0', parts[..., 2]).astype('f8')
            return re_ + 1j * im
        return tokens.astype('f8')
    except ValueError:
        for p in range(tokens.shape[0]):
            for v in range(tokens.shape[1]):
                _parse_number(tokens[p, v], is_complex, offset_of(p, v))
        raise ParseFailure("bad number in Values: section", offset_of(0, 0))


def parse_plots(text):
    """Parses every plot in an ASCII raw file.

    Parameters
    ----------
    text : str
        Raw-file contents.

    Returns
    -------
    plots : list of Plot

    Raises
    ------
    ParseFailure
        With the byte offset of the first malformed construct.

    """
    if isinstance(text, bytes):
        text = text.decode('utf-8', 'replace')
    lines = text.splitlines(True)
    offsets = np.cumsum([0] + [len(l.encode('utf-8')) for l in lines])
    plots = []
    i = 0
    n = len(lines)
    while i < n:
        while i < n and not lines[i].strip():
            i += 1
        if i >= n:
            break
        header = {}
        while i < n:
            line = lines[i].strip()
            if line.lower().startswith('binary:'):
                raise ParseFailure("binary raw files are not supported", int(offsets[i]))
            if line.lower().startswith('variables:'):
                break
            mo = _header_pattern.match(line)
            if mo is None:
                if line:
                    raise ParseFailure("unexpected header line {0!r}".format(line),
                                       int(offsets[i]))
            else:
                header[mo.group(1).strip().lower()] = mo.group(2).strip()
            i += 1
        if i >= n:
            raise ParseFailure("missing Variables: section", int(offsets[-1]))
        try:
            nvars = int(header['no. variables'])
            npoints = int(header['no. points'])
        except (KeyError, ValueError):
            raise ParseFailure("header lacks variable or point counts", int(offsets[i]))
        is_complex = 'complex' in header.get('flags', '').lower()
        i += 1
        names = []
        while i < n and len(names) < nvars:
            line = lines[i]
            if line.strip():
                fields = line.split()
                if len(fields) < 2 or fields[0] != str(len(names)):
                    raise ParseFailure("malformed variable line {0!r}".format(line.strip()),
                                       int(offsets[i]))
                names.append(fields[1])
            i += 1
        if len(names) != nvars:
            raise ParseFailure("expected {0} variables".format(nvars), int(offsets[min(i, n)]))
        while i < n and not lines[i].strip():
            i += 1
        if i >= n or not lines[i].strip().lower().startswith('values:'):
            raise ParseFailure("missing Values: section", int(offsets[min(i, n)]))
        values_start = i + 1
        j = values_start
        while j < n and not _header_pattern.match(lines[j].strip()):
            j += 1
        section = ''.join(lines[values_start:j])
        base = int(offsets[values_start]) if values_start < len(offsets) else int(offsets[-1])

        def byte_at(pos):
            return base + len(section[:pos].encode('utf-8'))

        matches = list(_token_pattern.finditer(section))
        if npoints == 0 or not matches:
            raise ParseFailure("empty Values: section", base)
        stride = nvars + 1
        if len(matches) != npoints * stride:
            bad = matches[min(len(matches), npoints * stride) - 1].start()
            raise ParseFailure("expected {0} values, found {1}".format(npoints * stride,
                               len(matches)), byte_at(bad))
        tokens = np.array([m.group(0) for m in matches]).reshape(npoints, stride)
        expected = np.arange(npoints).astype(str)
        wrong = np.flatnonzero(tokens[:, 0] != expected)
        if len(wrong):
            p = wrong[0]
            raise ParseFailure("point index {0!r} out of sequence".format(tokens[p, 0]),
                               byte_at(matches[p * stride].start()))
        data = _parse_block(tokens[:, 1:], is_complex,
                            lambda p, v: byte_at(matches[p * stride + 1 + v].start()))
        sweep = np.real(data[:, 0]).astype('f8')
        signals = OrderedDict()
        # operating-point plots have no sweep; the first variable is a signal
        plotname = header.get('plotname', '').lower()
        if nvars == 1 or plotname.startswith('operating point'):
            signals[canonical_name(names[0])] = data[:, 0]
        for v in range(1, nvars):
            signals[canonical_name(names[v])] = data[:, v]
        plots.append(Plot(header.get('title', ''), header.get('plotname', ''),
                          header.get('flags', ''), canonical_name(names[0]), sweep, signals))
        logger.debug("parsed plot %r: %d variables x %d points", header.get('plotname'),
                     nvars, npoints)
        i = j
    if not plots:
        raise ParseFailure("no plots in raw output", 0)
    return plots


def parse_raw(text):
    """Parses the first plot of an ASCII raw file into waveforms.

    Returns
    -------
    waveforms : OrderedDict of name -> Waveform
        One entry per non-sweep variable, keyed by canonical name.

    """
    return parse_plots(text)[0].waveforms()


def read_raw(path):
    with open(path, 'rb') as f:
        return parse_plots(f.read())


def write_raw(plotname, sweep_name, sweep, signals, title='pysizing'):
    """Writes waveforms in the ASCII raw layout, as the stub engines of the
    test-suite do.

    Parameters
    ----------
    plotname : str
    sweep_name : str
        eg 'frequency' or 'time'.
    sweep : array-like
    signals : mapping of name -> array-like

    """
    sweep = np.asarray(sweep)
    arrays = [np.asarray(v) for v in signals.values()]
    is_complex = any(np.iscomplexobj(a) for a in arrays)
    kind = {'frequency': 'frequency', 'time': 'time'}.get(sweep_name, 'voltage')
    s = ['Title: {0}'.format(title),
         'Date: -',
         'Plotname: {0}'.format(plotname),
         'Flags: {0}'.format('complex' if is_complex else 'real'),
         'No. Variables: {0}'.format(len(arrays) + 1),
         'No. Points: {0}'.format(len(sweep)),
         'Variables:',
         '\t0\t{0}\t{1}'.format(sweep_name, kind)]
    for k, name in enumerate(signals, 1):
        s.append('\t{0}\t{1}\t{2}'.format(k, name,
                                         'current' if name.startswith('i(') else 'voltage'))
    s.append('Values:')

    def fmt(x):
        if is_complex:
            x = complex(x)
            return '{0:.15e},{1:.15e}'.format(x.real, x.imag)
        return '{0:.15e}'.format(float(x))

    for p in range(len(sweep)):
        s.append(' {0}\t{1}'.format(p, fmt(sweep[p])))
        for a in arrays:
            s.append('\t{0}'.format(fmt(a[p])))
    return '\n'.join(s) + '\n'
