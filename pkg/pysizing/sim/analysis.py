"""Analysis and testbench descriptions.

These are plain immutable values: an :class:`AnalysisSpec` says what the
engine should compute and a :class:`TestbenchConfig` says how the device under
test is wired up for it.
"""
import math
from collections import namedtuple

from pysizing.utils import ConfigurationError, to_spice

# analysis kinds
OP = 'OP'
DC_SWEEP = 'DC_SWEEP'
AC = 'AC'
TRAN = 'TRAN'
ANALYSIS_KINDS = (OP, DC_SWEEP, AC, TRAN)

# testbench topologies
OPEN_LOOP = 'OPEN_LOOP'
UNITY_GAIN = 'UNITY_GAIN'
CM_DRIVE = 'CM_DRIVE'
DIFF_DRIVE = 'DIFF_DRIVE'
SINGLE_ENDED = 'SINGLE_ENDED'
FREE_RUN = 'FREE_RUN'
TOPOLOGIES = (OPEN_LOOP, UNITY_GAIN, CM_DRIVE, DIFF_DRIVE, SINGLE_ENDED, FREE_RUN)

# circuit families, each with its own port set and measurement table
OPAMP = 'opamp'
SINGLE = 'single_ended'
OSCILLATOR = 'free_run'

FAMILIES = {
    OPEN_LOOP: OPAMP,
    UNITY_GAIN: OPAMP,
    CM_DRIVE: OPAMP,
    DIFF_DRIVE: OPAMP,
    SINGLE_ENDED: SINGLE,
    FREE_RUN: OSCILLATOR,
    }

PORTS = {
    OPAMP: ('inp', 'inn', 'out', 'vdd'),
    SINGLE: ('in', 'out', 'vdd'),
    OSCILLATOR: ('out', 'vdd'),
    }


def family_of(topology):
    try:
        return FAMILIES[topology]
    except KeyError:
        raise ConfigurationError("unknown testbench topology {0!r}".format(topology))


class AnalysisSpec(namedtuple('AnalysisSpec', ['kind', 'params'])):
    """What to simulate.  ``params`` is a sorted tuple of (name, value) pairs so
    that specs hash and compare by value; use the ``op``, ``ac``, ``dc`` and
    ``tran`` constructors rather than building one directly."""
    __slots__ = ()

    def get(self, key, default=None):
        return dict(self.params).get(key, default)

    def __getattr__(self, name):
        for key, value in self.params:
            if key == name:
                return value
        raise AttributeError(name)

    @classmethod
    def op(cls):
        return cls(OP, ())

    @classmethod
    def ac(cls, per_decade=20, fstart=1.0, fstop=1e10):
        if per_decade < 1:
            raise ValueError("AC sweep needs at least one point per decade")
        if not 0.0 < fstart < fstop:
            raise ValueError("AC sweep needs 0 < fstart < fstop, got {0} and {1}".format(
                             fstart, fstop))
        return cls(AC, _items(per_decade=int(per_decade), fstart=float(fstart),
                              fstop=float(fstop)))

    @classmethod
    def dc(cls, source, start, stop, step):
        if not step > 0.0 or not stop > start:
            raise ValueError("DC sweep needs step > 0 and stop > start")
        return cls(DC_SWEEP, _items(source=source, start=float(start), stop=float(stop),
                                    step=float(step)))

    @classmethod
    def tran(cls, tstep, tstop, tstart=0.0, uic=False):
        if not tstop > 0.0 or not 0.0 < tstep < tstop or not 0.0 <= tstart < tstop:
            raise ValueError("TRAN needs 0 < tstep < tstop and 0 <= tstart < tstop")
        return cls(TRAN, _items(tstep=float(tstep), tstop=float(tstop),
                                tstart=float(tstart), uic=bool(uic)))

    def to_dict(self):
        return {'kind': self.kind, 'params': dict(self.params)}


def _items(**kwargs):
    return tuple(sorted(kwargs.items()))


class LoadCondition(namedtuple('LoadCondition', ['cl', 'rl'])):
    """Output load: capacitance [F] in parallel with resistance [Ω]."""
    __slots__ = ()

    def __new__(cls, cl, rl):
        cl, rl = float(cl), float(rl)
        if not (cl > 0.0 and rl > 0.0) or math.isinf(cl) or math.isinf(rl):
            raise ValueError("load capacitance and resistance must be positive")
        return super(LoadCondition, cls).__new__(cls, cl, rl)

    def __str__(self):
        return '{0}F, {1}Ω'.format(to_spice(self.cl, 'p'), to_spice(self.rl, 'k'))


Sine = namedtuple('Sine', ['amplitude', 'frequency'])


class TestbenchConfig(namedtuple('TestbenchConfig', ['topology', 'vcm', 'load', 'stimulus',
                                                     'supply_v', 'extras'])):
    """How the device is wired for one analysis.

    Parameters
    ----------
    topology : str
        One of TOPOLOGIES.
    vcm : float
        Input common-mode (or quiescent input) voltage [V].
    load : LoadCondition
    stimulus : Sine or None
        Sine drive for transient runs.
    supply_v : float
        Supply voltage [V], the upper end of input sweeps.
    extras : tuple of str
        Additional harness cards from the benchmark manifest (tied inputs,
        initial conditions).

    """
    __slots__ = ()
    __test__ = False

    def __new__(cls, topology, vcm, load, stimulus=None, supply_v=1.8, extras=()):
        family_of(topology)
        if not 0.0 <= vcm <= supply_v:
            raise ValueError("vcm {0} outside [0, {1}]".format(vcm, supply_v))
        if stimulus is not None and not (stimulus.amplitude > 0 and stimulus.frequency > 0):
            raise ValueError("sine stimulus needs positive amplitude and frequency")
        return super(TestbenchConfig, cls).__new__(cls, topology, float(vcm), load, stimulus,
                                                   float(supply_v), tuple(extras))

    @property
    def family(self):
        return FAMILIES[self.topology]

    def summary(self):
        s = '{0} vcm={1:g} CL={2:g} RL={3:g}'.format(self.topology, self.vcm, self.load.cl,
                                                     self.load.rl)
        if self.stimulus is not None:
            s += ' sine={0:g}V@{1:g}Hz'.format(self.stimulus.amplitude, self.stimulus.frequency)
        return s

    def to_dict(self):
        return {'topology': self.topology, 'vcm': self.vcm,
                'load': {'cl': self.load.cl, 'rl': self.load.rl},
                'stimulus': None if self.stimulus is None else dict(self.stimulus._asdict()),
                'supply_v': self.supply_v, 'extras': list(self.extras)}
