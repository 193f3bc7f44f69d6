"""The ``metrics`` module measures performance figures from simulation
waveforms::

    from pysizing import metrics

The eight opamp metrics are open-loop DC gain, unity-gain bandwidth, phase
margin, quiescent power, CMRR, THD, input offset and output range.  Three more
serve the simple benchmark circuits: logic switching-threshold error,
oscillation frequency and -3 dB corner frequency.

All values are kept in SI units (or dB / degrees); :func:`format_metric`
renders them in display units, with offsets in mV.
"""
import math
import logging
from collections import OrderedDict, namedtuple

import numpy as np
import scipy.fft

from pysizing.utils import PySizingError, ConfigurationError, from_si, to_si
from pysizing.bins import period_grid, contiguous_runs
from pysizing.pysizing_config import pysizing_conf
from pysizing.sim import analysis as an
from pysizing.sim.rawfile import Waveform

logger = logging.getLogger(__name__)

GAIN_DB = 'gain_db'
UGBW_HZ = 'ugbw_hz'
PM_DEG = 'pm_deg'
POWER_W = 'power_w'
CMRR_DB = 'cmrr_db'
THD_DB = 'thd_db'
OFFSET_V = 'offset_v'
OUTPUT_RANGE_V = 'output_range_v'
SWITCH_ERROR_V = 'switch_error_v'
OSC_FREQ_HZ = 'osc_freq_hz'
F3DB_HZ = 'f3db_hz'

OPAMP_KINDS = (GAIN_DB, UGBW_HZ, PM_DEG, POWER_W, CMRR_DB, THD_DB, OFFSET_V, OUTPUT_RANGE_V)
METRIC_KINDS = OPAMP_KINDS + (SWITCH_ERROR_V, OSC_FREQ_HZ, F3DB_HZ)

# display units and short names, in Table-style column order
DISPLAY_UNITS = {
    GAIN_DB: 'dB',
    UGBW_HZ: 'MHz',
    PM_DEG: 'deg',
    POWER_W: 'mW',
    CMRR_DB: 'dB',
    THD_DB: 'dB',
    OFFSET_V: 'mV',
    OUTPUT_RANGE_V: 'V',
    SWITCH_ERROR_V: 'mV',
    OSC_FREQ_HZ: 'MHz',
    F3DB_HZ: 'kHz',
    }

SHORT_NAMES = {
    GAIN_DB: 'gain',
    UGBW_HZ: 'ugbw',
    PM_DEG: 'pm',
    POWER_W: 'power',
    CMRR_DB: 'cmrr',
    THD_DB: 'thd',
    OFFSET_V: 'offset',
    OUTPUT_RANGE_V: 'range',
    SWITCH_ERROR_V: 'switch_error',
    OSC_FREQ_HZ: 'osc_freq',
    F3DB_HZ: 'f3db',
    }

LABELS = {
    GAIN_DB: 'Gain',
    UGBW_HZ: 'UGBW',
    PM_DEG: 'PM',
    POWER_W: 'Power',
    CMRR_DB: 'CMRR',
    THD_DB: 'THD',
    OFFSET_V: 'Offset',
    OUTPUT_RANGE_V: 'Output range',
    SWITCH_ERROR_V: 'Switching error',
    OSC_FREQ_HZ: 'Oscillation frequency',
    F3DB_HZ: '-3 dB frequency',
    }

# CMRR reported when the common-mode gain is exactly zero
CMRR_CEILING_DB = 400.0
THD_FLOOR = 1e-20

# open-loop AC transfer function signals
OUT = 'v(out)'
INP = 'v(inp)'
INN = 'v(inn)'
IN = 'v(in)'
CM = 'v(tb_cm)'

# which simulations each metric needs, per circuit family
REQUIREMENTS = {
    an.OPAMP: {
        GAIN_DB: ((an.AC, an.OPEN_LOOP),),
        UGBW_HZ: ((an.AC, an.OPEN_LOOP),),
        PM_DEG: ((an.AC, an.OPEN_LOOP),),
        CMRR_DB: ((an.AC, an.OPEN_LOOP), (an.AC, an.CM_DRIVE)),
        POWER_W: ((an.OP, an.OPEN_LOOP),),
        OFFSET_V: ((an.DC_SWEEP, an.UNITY_GAIN),),
        OUTPUT_RANGE_V: ((an.DC_SWEEP, an.UNITY_GAIN),),
        THD_DB: ((an.TRAN, an.UNITY_GAIN),),
        },
    an.SINGLE: {
        GAIN_DB: ((an.AC, an.SINGLE_ENDED),),
        F3DB_HZ: ((an.AC, an.SINGLE_ENDED),),
        POWER_W: ((an.OP, an.SINGLE_ENDED),),
        SWITCH_ERROR_V: ((an.DC_SWEEP, an.SINGLE_ENDED),),
        OUTPUT_RANGE_V: ((an.DC_SWEEP, an.SINGLE_ENDED),),
        },
    an.OSCILLATOR: {
        OSC_FREQ_HZ: ((an.TRAN, an.FREE_RUN),),
        POWER_W: ((an.OP, an.FREE_RUN),),
        },
    }


###############################################################################
### Errors
###############################################################################

class MeasurementError(PySizingError):
    """A metric could not be extracted from the given waveforms."""


class DegenerateInput(MeasurementError):
    """A zero magnitude where a ratio is needed."""


class NoCrossing(MeasurementError):
    """The response never crosses the required level."""


class MissingBranch(MeasurementError):
    """A needed branch current was not saved."""


class InsufficientRecord(MeasurementError):
    """Too little transient record after settling."""


class EmptyRange(MeasurementError):
    """No sweep point satisfies the tracking criterion."""


class IncompleteInputs(MeasurementError):
    """Simulations needed for the requested metrics are missing.  ``missing``
    lists the absent (analysis kind, topology) pairs."""

    def __init__(self, missing):
        self.missing = sorted(missing)
        super(IncompleteInputs, self).__init__("missing analyses: " + ', '.join(
            '{0}({1})'.format(k, t) for k, t in self.missing))


def required_analyses(kind, family=an.OPAMP):
    """The (analysis kind, topology) pairs a metric needs."""
    try:
        table = REQUIREMENTS[family]
    except KeyError:
        raise ConfigurationError("unknown circuit family {0!r}".format(family))
    if kind not in table:
        raise ConfigurationError("{0} cannot be measured on a {1} circuit".format(kind, family))
    return table[kind]


def kind_from_name(name):
    """Resolves a metric kind from its kind string or short name."""
    key = name.strip().lower()
    if key in METRIC_KINDS:
        return key
    for kind, short in SHORT_NAMES.items():
        if key == short:
            return kind
    raise ValueError("unknown metric {0!r}".format(name))


###############################################################################
### Frequency-domain measurements
###############################################################################

def transfer(result, out=OUT, inputs=(INP, INN)):
    """Complex transfer function out / (in+ - in-) from an AC result."""
    wout = result.waveform(out)
    vin = result.waveform(inputs[0]).values
    if len(inputs) > 1:
        vin = vin - result.waveform(inputs[1]).values
    with np.errstate(divide='ignore', invalid='ignore'):
        h = wout.values / vin
    return Waveform('{0}/{1}'.format(out, '-'.join(inputs)), wout.sweep, h)


def _db(values):
    with np.errstate(divide='ignore'):
        return 20.0 * np.log10(np.abs(values))


def dc_gain(ac):
    """DC gain [dB]: magnitude at the lowest swept frequency.

    Parameters
    ----------
    ac : Waveform
        Complex transfer function against frequency.

    Returns
    -------
    gain : float
        20 log10 |H(f_min)|.

    Raises
    ------
    DegenerateInput
        If |H(f_min)| is zero.

    """
    if ac.sweep[0] > 10.0:
        logger.warning("AC sweep starts at %g Hz; DC gain read above 10 Hz", ac.sweep[0])
    mag = abs(ac.values[0])
    if not mag > 0.0:
        raise DegenerateInput("zero gain at the lowest frequency")
    return 20.0 * math.log10(mag)


def _falling_crossing(x, y, level):
    """First downward crossing of y through level, interpolated linearly in x."""
    above = y > level
    idx = np.flatnonzero(above[:-1] & ~above[1:])
    if len(idx) == 0:
        return None
    i = idx[0]
    return x[i] + (level - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i])


def unity_gain_bandwidth(ac):
    """Unity-gain bandwidth [Hz].

    The first downward 0 dB crossing, found by linear interpolation of the
    dB magnitude against log10 of frequency between the bracketing points.

    Raises
    ------
    NoCrossing
        If the gain is not above unity at the lowest frequency or never falls
        to unity.

    """
    mag_db = _db(ac.values)
    if not mag_db[0] > 0.0:
        raise NoCrossing("gain is not above unity at {0:g} Hz".format(ac.sweep[0]))
    lf = _falling_crossing(np.log10(ac.sweep), mag_db, 0.0)
    if lf is None:
        raise NoCrossing("gain never falls to unity below {0:g} Hz".format(ac.sweep[-1]))
    return 10.0 ** lf


def unwrapped_phase(ac):
    """Phase [deg] unwrapped along the sweep and shifted by a multiple of 180°
    so the low-frequency phase lies within ±90° (inverting and non-inverting
    amplifiers read alike)."""
    phase = np.degrees(np.unwrap(np.angle(ac.values)))
    shift = 180.0 * math.floor(phase[0] / 180.0 + 0.5)
    return phase - shift


def phase_margin(ac, ugbw=None):
    """Phase margin [deg]: 180 plus the phase at the unity-gain frequency,
    interpolated linearly on log10 frequency.

    Raises
    ------
    NoCrossing
        Propagated from :func:`unity_gain_bandwidth`.

    """
    if ugbw is None:
        ugbw = unity_gain_bandwidth(ac)
    phase = unwrapped_phase(ac)
    phi = np.interp(math.log10(ugbw), np.log10(ac.sweep), phase)
    return 180.0 + float(phi)


def corner_frequency(ac):
    """-3 dB corner [Hz] relative to the lowest-frequency gain."""
    mag_db = _db(ac.values)
    if not np.isfinite(mag_db[0]):
        raise DegenerateInput("zero response at the lowest frequency")
    lf = _falling_crossing(np.log10(ac.sweep), mag_db - mag_db[0], -10.0 * math.log10(2.0))
    if lf is None:
        raise NoCrossing("response never falls 3 dB within the sweep")
    return 10.0 ** lf


def cmrr(ac_dm, ac_cm):
    """Common-mode rejection ratio [dB] at the lowest swept frequency.

    Parameters
    ----------
    ac_dm, ac_cm : Waveform
        Differential and common-mode gains on the same frequency grid.

    Raises
    ------
    DegenerateInput
        If the common-mode gain is exactly zero.

    """
    if len(ac_dm.sweep) != len(ac_cm.sweep) or not np.allclose(ac_dm.sweep, ac_cm.sweep):
        raise ValueError("differential and common-mode sweeps differ")
    adm = abs(ac_dm.values[0])
    acm = abs(ac_cm.values[0])
    if acm == 0.0:
        raise DegenerateInput("common-mode gain is zero; CMRR exceeds measurable range")
    if adm == 0.0:
        raise DegenerateInput("differential gain is zero")
    return 20.0 * math.log10(adm / acm)


###############################################################################
### Operating-point, DC and transient measurements
###############################################################################

def quiescent_power(op, supply_v, source='vdd'):
    """Quiescent power [W]: supply voltage times the supply branch current.

    Raises
    ------
    MissingBranch
        If the supply current is not in the operating point.

    """
    key = 'i({0})'.format(source.lower())
    try:
        current = op[key]
    except KeyError:
        raise MissingBranch("operating point lacks {0}".format(key))
    return supply_v * abs(current)


def thd(tran, f0, n_harmonics=5, settle_periods=6, window_periods=8, min_periods=10,
        npoints=2 ** 15):
    """Total harmonic distortion [dB] of a periodic transient record.

    The last ``window_periods`` periods are resampled by linear interpolation
    onto a uniform grid of ``npoints`` samples and transformed without a
    window, so harmonic k falls exactly on bin k * window_periods.

    Parameters
    ----------
    tran : Waveform
        Real signal against time.
    f0 : float
        Fundamental [Hz].
    n_harmonics : int, optional
        Highest harmonic included (the fundamental counts as the first).
    settle_periods : int, optional
        Leading periods treated as start-up transient.
    window_periods : int, optional
    min_periods : int, optional
        Clean periods required after settling.
    npoints : int, optional

    Returns
    -------
    thd : float
        20 log10( sqrt(sum_{k=2..n} |X_k|^2) / |X_1| ), floored at -400 dB.

    Raises
    ------
    InsufficientRecord
        If fewer than ``min_periods`` periods follow the settling time.
    DegenerateInput
        If the fundamental is absent.

    """
    t = tran.sweep
    duration = t[-1] - t[0]
    clean = duration * f0 - settle_periods
    if clean < min_periods - 1e-6:
        raise InsufficientRecord("{0:.2f} clean periods after settling, need {1}".format(
                                 clean, min_periods))
    grid = period_grid(t[-1], f0, window_periods, npoints)
    y = np.interp(grid, t, np.real(tran.values))
    spectrum = np.abs(scipy.fft.rfft(y))
    bins = [k * window_periods for k in range(1, n_harmonics + 1)]
    if bins[-1] >= len(spectrum):
        raise InsufficientRecord("sampling too coarse for {0} harmonics".format(n_harmonics))
    fundamental = spectrum[bins[0]]
    if not fundamental > 0.0:
        raise DegenerateInput("no signal at the fundamental")
    harmonics = np.sqrt(np.sum(spectrum[bins[1:]] ** 2))
    ratio = max(harmonics / fundamental, THD_FLOOR)
    return 20.0 * math.log10(ratio)


def _covers(dc, x):
    if not dc.sweep[0] <= x <= dc.sweep[-1]:
        raise DegenerateInput("sweep [{0:g}, {1:g}] does not cover {2:g} V".format(
                              dc.sweep[0], dc.sweep[-1], x))


def signed_offset(dc, vcm=0.9):
    """Follower error Vout(vcm) - vcm [V], interpolated."""
    _covers(dc, vcm)
    return float(np.interp(vcm, dc.sweep, np.real(dc.values))) - vcm


def input_offset(dc, vcm=0.9):
    """Input offset [V] of a unity-gain follower: |Vout(vcm) - vcm|."""
    return abs(signed_offset(dc, vcm))


def output_range(dc, supply=None, slope_min=0.9):
    """Output range [V] of a follower transfer curve.

    The output span over the largest contiguous input interval (by input
    span) made of sweep segments whose slope dVout/dVin is at least
    ``slope_min``.  The interval ends at the last sample that still tracks,
    never beyond it.

    Raises
    ------
    EmptyRange
        If no segment meets the slope criterion.

    """
    x = dc.sweep
    y = np.real(dc.values)
    if len(x) < 3:
        raise EmptyRange("need at least three sweep points")
    # central difference at the midpoint of segment i, which joins samples i and i + 1
    slope = np.diff(y) / np.diff(x)
    runs = contiguous_runs(slope >= slope_min)
    if not runs:
        raise EmptyRange("output never tracks the input with slope >= {0}".format(slope_min))
    start, stop = max(runs, key=lambda r: (x[r[1]] - x[r[0]], -r[0]))
    span = float(np.max(y[start:stop + 1]) - np.min(y[start:stop + 1]))
    if supply is not None:
        span = min(max(span, 0.0), supply)
    return span


def switching_error(dc, supply):
    """|Vin - supply/2| at the point where the output crosses supply/2."""
    x = dc.sweep
    y = np.real(dc.values) - supply / 2.0
    sign = np.sign(y)
    idx = np.flatnonzero(sign[:-1] * sign[1:] <= 0)
    idx = [i for i in idx if y[i] != y[i + 1]]
    if not idx:
        raise NoCrossing("output never crosses mid-supply")
    i = idx[0]
    vth = x[i] - y[i] * (x[i + 1] - x[i]) / (y[i + 1] - y[i])
    return abs(vth - supply / 2.0)


def oscillation_frequency(tran, settle_fraction=0.5):
    """Frequency [Hz] of a free-running waveform from its rising mid-level
    crossings after the first ``settle_fraction`` of the record."""
    t = tran.sweep
    y = np.real(tran.values)
    keep = t >= t[0] + settle_fraction * (t[-1] - t[0])
    t, y = t[keep], y[keep]
    lo, hi = np.min(y), np.max(y)
    if not hi - lo > 1e-6:
        raise NoCrossing("waveform does not oscillate")
    level = 0.5 * (lo + hi)
    rising = np.flatnonzero((y[:-1] < level) & (y[1:] >= level))
    if len(rising) < 3:
        raise NoCrossing("fewer than three rising edges after settling")
    tc = t[rising] + (level - y[rising]) * (t[rising + 1] - t[rising]) / \
        (y[rising + 1] - y[rising])
    return (len(tc) - 1) / (tc[-1] - tc[0])


###############################################################################
### Reports
###############################################################################

class MetricValue(namedtuple('MetricValue', ['kind', 'value', 'measured_at'])):
    """A measured value in SI units (dB and degrees pass through)."""
    __slots__ = ()

    def __new__(cls, kind, value, measured_at=''):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError("{0} must be finite, got {1!r}".format(kind, value))
        if kind == UGBW_HZ and not value > 0.0:
            raise ValueError("unity-gain bandwidth must be positive")
        return super(MetricValue, cls).__new__(cls, kind, value, measured_at)


class MetricReport(object):
    """Measured values for one design point.

    Parameters
    ----------
    values : mapping of kind -> MetricValue
    load : LoadCondition
    design_point_id : int or str, optional
    absent : mapping of kind -> str, optional
        Why a targeted metric could not be measured.
    notes : mapping of kind -> str, optional
        Remarks on measured values (eg a CMRR ceiling).

    """

    def __init__(self, values, load, design_point_id=None, absent=None, notes=None):
        self.values = OrderedDict((k, values[k]) for k in METRIC_KINDS if k in values)
        self.load = load
        self.design_point_id = design_point_id
        self.absent = OrderedDict(sorted((absent or {}).items()))
        self.notes = OrderedDict(sorted((notes or {}).items()))

    def __contains__(self, kind):
        return kind in self.values

    def __getitem__(self, kind):
        return self.values[kind]

    def get(self, kind, default=None):
        mv = self.values.get(kind)
        return default if mv is None else mv.value

    def kinds(self):
        return list(self.values)

    def to_dict(self):
        return {
            'design_point_id': self.design_point_id,
            'load': {'cl': self.load.cl, 'rl': self.load.rl} if self.load else None,
            'values': OrderedDict((k, v.value) for k, v in self.values.items()),
            'measured_at': OrderedDict((k, v.measured_at) for k, v in self.values.items()),
            'absent': dict(self.absent),
            'notes': dict(self.notes),
            }

    def __eq__(self, other):
        if not isinstance(other, MetricReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None

    def __repr__(self):
        return "MetricReport({0})".format(', '.join(
            '{0}={1}'.format(SHORT_NAMES[k], format_metric(k, v.value))
            for k, v in self.values.items()))


def report_from_dict(data, display_units=False):
    """Rebuilds a report from :meth:`MetricReport.to_dict` output.

    Parameters
    ----------
    data : dict
        ``values`` maps kind names (or short names) to numbers.
    display_units : bool, optional
        Values are in display units (MHz, mW, mV) rather than SI.

    """
    load = data.get('load')
    if load is not None:
        load = an.LoadCondition(load['cl'], load['rl'])
    measured_at = data.get('measured_at', {})
    values = {}
    for name, value in data.get('values', {}).items():
        kind = kind_from_name(name)
        if value is None:
            continue
        if display_units:
            value = to_si(value, DISPLAY_UNITS[kind])
        values[kind] = MetricValue(kind, value, measured_at.get(name, ''))
    absent = dict((kind_from_name(k), v) for k, v in data.get('absent', {}).items())
    notes = dict((kind_from_name(k), v) for k, v in data.get('notes', {}).items())
    return MetricReport(values, load, data.get('design_point_id'), absent, notes)


def format_metric(kind, value, digits=4):
    """Renders a value in display units, eg '19.95 MHz' or '0.98 mV'."""
    units = DISPLAY_UNITS[kind]
    shown = from_si(value, units)
    return '{0:.{1}g} {2}'.format(shown, digits, units)


def display_value(kind, value, digits=6):
    """Compact display form for prompts, eg '10 MHz' or '52.25°'."""
    units = DISPLAY_UNITS[kind]
    shown = '{0:.{1}g}'.format(from_si(value, units), digits)
    if units == 'deg':
        return shown + '°'
    return shown + ' ' + units


def _index(sim_results):
    index = {}
    for result in sim_results:
        index[(result.analysis.kind, result.testbench.topology)] = result
    return index


def _measure(kind, family, index, supply_v, vcm, supply_source, conf):
    """Measures one kind from indexed results; returns (value, note)."""
    note = None
    if family == an.OPAMP:
        if kind in (GAIN_DB, UGBW_HZ, PM_DEG):
            h = transfer(index[(an.AC, an.OPEN_LOOP)])
            if kind == GAIN_DB:
                return dc_gain(h), note
            if kind == UGBW_HZ:
                return unity_gain_bandwidth(h), note
            return phase_margin(h), note
        if kind == CMRR_DB:
            dm = transfer(index[(an.AC, an.OPEN_LOOP)])
            cm = transfer(index[(an.AC, an.CM_DRIVE)], inputs=(CM,))
            try:
                return cmrr(dm, cm), note
            except DegenerateInput as e:
                if abs(cm.values[0]) == 0.0:
                    return CMRR_CEILING_DB, "exceeds measurable range"
                raise
        if kind == POWER_W:
            return quiescent_power(index[(an.OP, an.OPEN_LOOP)].op_point, supply_v,
                                   supply_source), note
        if kind in (OFFSET_V, OUTPUT_RANGE_V):
            dc = index[(an.DC_SWEEP, an.UNITY_GAIN)].waveform(OUT)
            if kind == OFFSET_V:
                return input_offset(dc, vcm), note
            return output_range(dc, supply_v), note
        if kind == THD_DB:
            result = index[(an.TRAN, an.UNITY_GAIN)]
            f0 = result.testbench.stimulus.frequency
            return thd(result.waveform(OUT), f0, conf.get('thd_harmonics', 5)), note
    elif family == an.SINGLE:
        if kind in (GAIN_DB, F3DB_HZ):
            h = transfer(index[(an.AC, an.SINGLE_ENDED)], inputs=(IN,))
            return (dc_gain(h) if kind == GAIN_DB else corner_frequency(h)), note
        if kind == POWER_W:
            return quiescent_power(index[(an.OP, an.SINGLE_ENDED)].op_point, supply_v,
                                   supply_source), note
        dc = index[(an.DC_SWEEP, an.SINGLE_ENDED)].waveform(OUT)
        if kind == SWITCH_ERROR_V:
            return switching_error(dc, supply_v), note
        if kind == OUTPUT_RANGE_V:
            return output_range(dc, supply_v), note
    elif family == an.OSCILLATOR:
        if kind == OSC_FREQ_HZ:
            return oscillation_frequency(index[(an.TRAN, an.FREE_RUN)].waveform(OUT)), note
        if kind == POWER_W:
            return quiescent_power(index[(an.OP, an.FREE_RUN)].op_point, supply_v,
                                   supply_source), note
    raise MeasurementError("no measurement for {0} on {1} circuits".format(kind, family))


def assemble_report(sim_results, group, family=None, supply_source='vdd',
                    design_point_id=None, failed=None, conf=None):
    """Measures every metric a target group asks for.

    Parameters
    ----------
    sim_results : list of SimResult
        Labelled results (analysis and testbench set).
    group : TargetGroup
        Supplies the targeted kinds, the load, supply and common-mode voltage.
    family : str, optional
        Circuit family; inferred from the results' topologies when absent.
    supply_source : str, optional
        Name of the supply voltage source whose current gives the power.
    design_point_id : optional
        Iteration reference stored in the report.
    failed : mapping of (analysis kind, topology) -> str, optional
        Simulations that were attempted but failed; metrics needing them are
        marked absent with this reason instead of raising.
    conf : mapping, optional

    Returns
    -------
    report : MetricReport
        Every targeted kind is present or carries an absence reason.

    Raises
    ------
    IncompleteInputs
        If a needed simulation is neither present nor listed as failed.

    """
    conf = pysizing_conf if conf is None else conf
    failed = dict(failed or {})
    index = _index(sim_results)
    if family is None:
        topologies = [k[1] for k in list(index) + list(failed)]
        family = an.family_of(topologies[0]) if topologies else an.OPAMP
    kinds = [t.kind for t in group.targets]
    missing = set()
    for kind in kinds:
        for need in required_analyses(kind, family):
            if need not in index and need not in failed:
                missing.add(need)
    if missing:
        raise IncompleteInputs(missing)
    values, absent, notes = {}, {}, {}
    for kind in kinds:
        down = [failed[n] for n in required_analyses(kind, family) if n in failed]
        if down:
            absent[kind] = down[0]
            continue
        try:
            value, note = _measure(kind, family, index, group.supply_v, group.vcm,
                                   supply_source, conf)
        except (MeasurementError, KeyError) as e:
            absent[kind] = '{0}: {1}'.format(e.__class__.__name__, e)
            continue
        measured_at = ' '.join('{0} {1}'.format(k, t) for k, t in
                               required_analyses(kind, family))
        values[kind] = MetricValue(kind, value, measured_at)
        if note:
            notes[kind] = note
    if absent:
        logger.info("design point %s: %d metric(s) absent: %s", design_point_id, len(absent),
                    ', '.join(SHORT_NAMES[k] for k in absent))
    return MetricReport(values, group.load, design_point_id, absent, notes)
