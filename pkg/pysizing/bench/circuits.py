"""Shipped benchmark circuits.

Each circuit lives in ``data/<name>/`` as a SPICE netlist, ``netlist.sp``, and a
JSON manifest, ``manifest.json``.  The manifest holds:

* ``circuit_type`` -- the label used in prompts;
* ``testbench`` -- harness topology, optional ``extras`` cards and an optional
  ``tran`` override (``tstep``, ``tstop``, ``uic``);
* ``default_group`` -- a builtin group name or a target-group mapping;
* ``policy`` -- grouping of matched devices and bias sources;
* ``sensitivity`` -- metric -> {tunable label -> signed weight} for the
  baseline engine;
* ``fixtures`` -- named parameter sets, {label -> {param -> value}}.

All netlists include the shared ``ptm180.lib`` model card.
"""
import os
import logging
from collections import OrderedDict

try:
    import simplejson as json
except ImportError:
    import json

from pysizing import targets as tg
from pysizing.metrics import kind_from_name
from pysizing.netlist import ParamPatch, NetlistError, read_netlist, extract_tunables, \
    apply_patch, validate_constraints, supply_sources, policy_biases
from pysizing.sim import analysis as an
from pysizing.utils import ConfigurationError, from_spice

logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data')
MODEL_LIB = os.path.join(DATA_DIR, 'ptm180.lib')

BENCHMARKS = ('inverter', 'nand', 'xor', 'ring_oscillator', '5t_ota', 'common_source',
              'rc_filter', 'opamp20t')


class UnknownBenchmark(ConfigurationError, KeyError):
    """No shipped circuit by that name."""

    def __str__(self):
        return ConfigurationError.__str__(self)


def _fixture_patch(fixture, name):
    assignments = OrderedDict()
    for label, params in fixture.items():
        for param, value in params.items():
            assignments[(label, param.upper())] = from_spice(value)
    return ParamPatch(assignments, 'fixture {0}'.format(name))


class BenchCircuit(object):
    """A benchmark netlist with its manifest.

    Attributes
    ----------
    name : str
    netlist : NetlistDoc
    manifest : dict
    default_group : TargetGroup
    tunables : list of TunableParam
    include_dir : str
        Directory the netlist's relative includes resolve against.

    """

    def __init__(self, name, netlist, manifest, include_dir):
        self.name = name
        self.netlist = netlist
        self.manifest = manifest
        self.include_dir = include_dir
        try:
            self.tunables = extract_tunables(netlist, self.policy)
        except NetlistError as e:
            raise ConfigurationError("benchmark {0}: {1}".format(name, e))
        self.default_group = self._group(manifest.get('default_group'))

    def _group(self, spec):
        if spec is None:
            raise ConfigurationError("benchmark {0} names no default group".format(self.name))
        if isinstance(spec, str):
            return tg.get_group(spec)
        return tg.group_from_dict(spec)

    @property
    def policy(self):
        return self.manifest.get('policy') or {}

    @property
    def circuit_type(self):
        return self.manifest.get('circuit_type', self.name)

    @property
    def sensitivity(self):
        return self.manifest.get('sensitivity') or {}

    @property
    def fixtures(self):
        return sorted(self.manifest.get('fixtures') or {})

    @property
    def topology(self):
        return (self.manifest.get('testbench') or {}).get('topology', an.OPEN_LOOP)

    @property
    def family(self):
        return an.family_of(self.topology)

    @property
    def bias_sources(self):
        """Names of the voltage sources the policy declares as biases."""
        return [n for _, n in policy_biases(self.policy)]

    @property
    def supply_source(self):
        supplies = supply_sources(self.netlist,
                                  exclude=self.bias_sources)
        return supplies[0].lower() if supplies else 'vdd'

    def testbench(self, group=None):
        """Base testbench for a group (the default group when absent)."""
        group = self.default_group if group is None else group
        extras = (self.manifest.get('testbench') or {}).get('extras', ())
        return an.TestbenchConfig(self.topology, group.vcm, group.load, None, group.supply_v,
                                  extras)

    def tran_spec(self):
        """The manifest's transient override, or None."""
        tran = (self.manifest.get('testbench') or {}).get('tran')
        if not tran:
            return None
        return an.AnalysisSpec.tran(from_spice(tran['tstep']), from_spice(tran['tstop']),
                                    from_spice(tran.get('tstart', 0)),
                                    bool(tran.get('uic', False)))

    def fixture_patch(self, name):
        try:
            fixture = self.manifest['fixtures'][name]
        except KeyError:
            raise ConfigurationError("benchmark {0} has no fixture {1!r}; have {2}".format(
                                     self.name, name, ', '.join(self.fixtures) or 'none'))
        return _fixture_patch(fixture, name)

    def apply_fixture(self, name):
        """The netlist with a named parameter set applied."""
        return apply_patch(self.netlist, self.fixture_patch(name), self.netlist,
                           self.tunables)

    def validate(self):
        """Checks sensitivity labels, fixtures and the netlist's constraints."""
        labels = set(t.label.lower() for t in self.tunables)
        for metric, weights in self.sensitivity.items():
            try:
                kind_from_name(metric)
            except ValueError as e:
                raise ConfigurationError("benchmark {0}: {1}".format(self.name, e))
            for label in weights:
                if label.lower() not in labels:
                    raise ConfigurationError("benchmark {0}: sensitivity label {1!r} is not "
                                             "a tunable".format(self.name, label))
        if validate_constraints(self.netlist, self.netlist, biases=self.bias_sources):
            raise ConfigurationError("benchmark {0} fails its own constraints".format(
                                     self.name))
        for name in self.fixtures:
            try:
                self.apply_fixture(name)
            except NetlistError as e:
                raise ConfigurationError("benchmark {0} fixture {1}: {2}".format(
                                         self.name, name, e))
        return self

    def __repr__(self):
        return "BenchCircuit({0!r}, {1} tunables)".format(self.name, len(self.tunables))


def benchmark_dir(name):
    return os.path.join(DATA_DIR, name)


def load_benchmark(name):
    """Loads and validates a shipped circuit.

    Parameters
    ----------
    name : str
        One of BENCHMARKS.

    Returns
    -------
    circuit : BenchCircuit

    Raises
    ------
    UnknownBenchmark

    """
    key = name.lower()
    if key not in BENCHMARKS:
        raise UnknownBenchmark("no benchmark {0!r}; have {1}".format(name,
                                                                    ', '.join(BENCHMARKS)))
    path = benchmark_dir(key)
    with open(os.path.join(path, 'manifest.json')) as f:
        manifest = json.load(f)
    doc = read_netlist(os.path.join(path, 'netlist.sp'))
    circuit = BenchCircuit(key, doc, manifest, path).validate()
    logger.debug("loaded benchmark %r", circuit)
    return circuit
