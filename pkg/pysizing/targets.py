"""Performance targets and the tolerance rule used to judge them.

Every target relaxes by a fraction (5% by default) of the magnitude of the
target value, always in the favorable direction.  A design point passes a
group only if every targeted metric is present and passes.
"""
import math
import logging
from collections import OrderedDict, namedtuple

try:
    import simplejson as json
except ImportError:
    import json

from pysizing import metrics as m
from pysizing.sim.analysis import LoadCondition
from pysizing.utils import ConfigurationError, from_spice, to_si, from_si

logger = logging.getLogger(__name__)

AT_LEAST = 'AT_LEAST'
AT_MOST = 'AT_MOST'
DIRECTIONS = (AT_LEAST, AT_MOST)

DEFAULT_TOLERANCE = 0.05
DEFAULT_SUPPLY = 1.8
DEFAULT_VCM = 0.9

_direction_symbols = {AT_LEAST: '>=', AT_MOST: '<='}
_symbol_directions = {'>=': AT_LEAST, '≥': AT_LEAST, 'at_least': AT_LEAST, 'min': AT_LEAST,
                      '<=': AT_MOST, '≤': AT_MOST, 'at_most': AT_MOST, 'max': AT_MOST}


class TargetSpec(namedtuple('TargetSpec', ['kind', 'direction', 'value', 'tolerance'])):
    """One directional requirement on a metric, value in SI units."""
    __slots__ = ()

    def __new__(cls, kind, direction, value, tolerance=DEFAULT_TOLERANCE):
        if kind not in m.METRIC_KINDS:
            raise ConfigurationError("unknown metric kind {0!r}".format(kind))
        if direction not in DIRECTIONS:
            raise ConfigurationError("direction must be AT_LEAST or AT_MOST, not {0!r}".format(
                                     direction))
        value = float(value)
        if not math.isfinite(value):
            raise ConfigurationError("target for {0} must be finite".format(kind))
        if not 0.0 <= tolerance < 0.5:
            raise ConfigurationError("tolerance must lie in [0, 0.5), got {0}".format(tolerance))
        return super(TargetSpec, cls).__new__(cls, kind, direction, value, float(tolerance))

    def describe(self):
        """eg 'pm >= 55 deg (accepted >= 52.25 deg)'."""
        sym = _direction_symbols[self.direction]
        return '{0} {1} {2} (accepted {1} {3})'.format(
            m.SHORT_NAMES[self.kind], sym, m.format_metric(self.kind, self.value),
            m.format_metric(self.kind, relaxed_bound(self)))


class TargetGroup(namedtuple('TargetGroup', ['name', 'targets', 'load', 'max_iterations',
                                             'supply_v', 'vcm'])):
    """A named set of targets with its load condition and iteration budget."""
    __slots__ = ()

    def __new__(cls, name, targets, load, max_iterations=25, supply_v=DEFAULT_SUPPLY,
                vcm=DEFAULT_VCM):
        targets = tuple(targets)
        kinds = [t.kind for t in targets]
        if len(set(kinds)) != len(kinds):
            raise ConfigurationError("group {0!r} targets a metric twice".format(name))
        if int(max_iterations) < 1:
            raise ConfigurationError("max_iterations must be at least 1")
        return super(TargetGroup, cls).__new__(cls, name, targets, load, int(max_iterations),
                                               float(supply_v), float(vcm))

    def __getitem__(self, key):
        if isinstance(key, str):
            for t in self.targets:
                if t.kind == key:
                    return t
            raise KeyError(key)
        return super(TargetGroup, self).__getitem__(key)

    @property
    def kinds(self):
        return [t.kind for t in self.targets]


def relaxed_bound(spec):
    """The accepted bound after tolerance: value -/+ tolerance * |value|."""
    slack = spec.tolerance * abs(spec.value)
    if spec.direction == AT_LEAST:
        return spec.value - slack
    return spec.value + slack


MetricCheck = namedtuple('MetricCheck', ['passed', 'margin', 'relaxed_bound'])


class CheckResult(namedtuple('CheckResult', ['per_metric', 'overall_pass', 'missing'])):
    """Verdict for a report against a group.  ``per_metric`` maps kind to
    MetricCheck; ``missing`` holds targeted kinds absent from the report."""
    __slots__ = ()

    @property
    def n_passing(self):
        return sum(1 for c in self.per_metric.values() if c.passed)

    @property
    def failing(self):
        return [k for k, c in self.per_metric.items() if not c.passed]

    def to_dict(self):
        return {'overall_pass': self.overall_pass,
                'missing': sorted(self.missing),
                'per_metric': OrderedDict((k, {'pass': c.passed, 'margin': c.margin,
                                               'relaxed_bound': c.relaxed_bound})
                                          for k, c in self.per_metric.items())}


def check_metric(value, spec):
    """Judges one value against one target.

    Parameters
    ----------
    value : MetricValue or float
    spec : TargetSpec

    Returns
    -------
    check : MetricCheck
        ``margin`` is the signed distance to the relaxed bound, positive on the
        passing side.

    """
    if isinstance(value, m.MetricValue):
        if value.kind != spec.kind:
            raise ValueError("cannot check {0} against a {1} target".format(value.kind,
                                                                            spec.kind))
        value = value.value
    bound = relaxed_bound(spec)
    margin = value - bound if spec.direction == AT_LEAST else bound - value
    return MetricCheck(margin >= 0.0, margin, bound)


def relative_margin(check, spec):
    """Margin normalized by the target magnitude (by 1 for zero targets)."""
    return check.margin / (abs(spec.value) or 1.0)


def check_all(report, group):
    """Judges a report against every target of a group.

    Absent metrics are listed in ``missing`` and force an overall failure.
    """
    per_metric = OrderedDict()
    missing = set()
    for spec in group.targets:
        if report is None or spec.kind not in report:
            missing.add(spec.kind)
            continue
        per_metric[spec.kind] = check_metric(report[spec.kind], spec)
    overall = not missing and all(c.passed for c in per_metric.values())
    return CheckResult(per_metric, overall, frozenset(missing))


def score(check, group):
    """Ranking key for design points: (passing count, summed relative margin),
    with failing margins counted in full and passing ones capped at zero."""
    specs = dict((t.kind, t) for t in group.targets)
    total = 0.0
    for kind, c in check.per_metric.items():
        total += min(relative_margin(c, specs[kind]), 0.0)
    total -= len(check.missing)
    return (check.n_passing, total)


###############################################################################
### Built-in groups
###############################################################################

def _spec(kind, direction, value, units):
    return TargetSpec(kind, direction, to_si(value, units))


def builtin_groups():
    """The three opamp target groups G1, G2 and G3.

    Returns
    -------
    groups : OrderedDict of name -> TargetGroup

    """
    def opamp(ugbw, pm, power, offset, rng):
        return [_spec(m.GAIN_DB, AT_LEAST, 65, 'dB'),
                _spec(m.UGBW_HZ, AT_LEAST, ugbw, 'MHz'),
                _spec(m.PM_DEG, AT_LEAST, pm, 'deg'),
                _spec(m.POWER_W, AT_MOST, power, 'mW'),
                _spec(m.CMRR_DB, AT_LEAST, 100, 'dB'),
                _spec(m.THD_DB, AT_MOST, -26, 'dB'),
                _spec(m.OFFSET_V, AT_MOST, offset, 'mV'),
                _spec(m.OUTPUT_RANGE_V, AT_LEAST, rng, 'V')]

    groups = OrderedDict()
    groups['G1'] = TargetGroup('G1', opamp(10, 55, 10, 1, 1.75), LoadCondition(10e-12, 1e3), 25)
    groups['G2'] = TargetGroup('G2', opamp(5, 45, 5, 1, 1.75), LoadCondition(50e-12, 100e3), 25)
    groups['G3'] = TargetGroup('G3', opamp(50, 55, 50, 5, 1.7), LoadCondition(10e-12, 1e3), 25)
    return groups


def get_group(name):
    """A builtin group by name (case-insensitive)."""
    groups = builtin_groups()
    try:
        return groups[name.upper()]
    except KeyError:
        raise ConfigurationError("no builtin target group {0!r}; have {1}".format(
                                 name, ', '.join(groups)))


def with_budget(group, max_iterations):
    """Copy of a group with another iteration budget."""
    return TargetGroup(group.name, group.targets, group.load, max_iterations, group.supply_v,
                       group.vcm)


###############################################################################
### Target files
###############################################################################

def group_from_dict(data):
    """Builds a group from a target-file mapping.

    The mapping holds ``name``, ``targets`` (a list of ``{"metric",
    "direction", "value", "unit", "tolerance"}``), ``load`` (``{"cl", "rl"}`` in
    SPICE notation or SI numbers), ``max_iterations``, ``supply_v`` and
    ``vcm``.  Values are in the given display units.
    """
    try:
        targets = []
        for t in data['targets']:
            kind = m.kind_from_name(t['metric'])
            direction = t['direction']
            direction = _symbol_directions.get(direction.lower(), direction.upper())
            units = t.get('unit', m.DISPLAY_UNITS[kind])
            targets.append(TargetSpec(kind, direction, to_si(float(t['value']), units),
                                      t.get('tolerance', DEFAULT_TOLERANCE)))
        load = data.get('load', {'cl': 10e-12, 'rl': 1e3})
        load = LoadCondition(from_spice(load['cl']), from_spice(load['rl']))
        return TargetGroup(data.get('name', 'custom'), targets, load,
                           data.get('max_iterations', 25),
                           data.get('supply_v', DEFAULT_SUPPLY), data.get('vcm', DEFAULT_VCM))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigurationError("bad target group: {0}".format(e))


def group_to_dict(group):
    """Inverse of :func:`group_from_dict`, in display units."""
    return {
        'name': group.name,
        'targets': [{'metric': m.SHORT_NAMES[t.kind], 'direction': t.direction,
                     'value': from_si(t.value, m.DISPLAY_UNITS[t.kind]),
                     'unit': m.DISPLAY_UNITS[t.kind], 'tolerance': t.tolerance}
                    for t in group.targets],
        'load': {'cl': group.load.cl, 'rl': group.load.rl},
        'max_iterations': group.max_iterations,
        'supply_v': group.supply_v,
        'vcm': group.vcm,
        }


def load_group(path):
    """Reads a JSON target file."""
    try:
        with open(path) as f:
            data = json.load(f)
    except (IOError, OSError, ValueError) as e:
        raise ConfigurationError("could not read target file {0!r}: {1}".format(path, e))
    group = group_from_dict(data)
    logger.debug("loaded target group %s from %s", group.name, path)
    return group


def resolve_group(name_or_path):
    """A builtin group name or the path of a target file."""
    if name_or_path.upper() in builtin_groups():
        return get_group(name_or_path)
    return load_group(name_or_path)
