"""PySizing simulation engine tests"""
import os
import shutil
import tempfile

import numpy as np
import pytest
from numpy.testing import assert_equal, assert_almost_equal, assert_raises, assert_allclose

from pysizing import metrics as m
from pysizing.bench.circuits import benchmark_dir
from pysizing.netlist import read_netlist
from pysizing.pysizing_config import pysizing_conf
from pysizing.sim import analysis as an
from pysizing.sim.analysis import AnalysisSpec, LoadCondition, TestbenchConfig
from pysizing.sim.cache import SimCache
from pysizing.sim.engine import SimEngine, NgspiceEngine, Limits, run_simulation, \
    result_from_raw
from pysizing.sim.errors import SimulationError, ConvergenceFailure, EngineNotFound, \
    ParseFailure, Timeout, log_excerpt
from pysizing.sim.rawfile import write_raw

have_ngspice = shutil.which(pysizing_conf['engine_path']) is not None
needs_ngspice = pytest.mark.skipif(not have_ngspice, reason="ngspice is not on the path")

F = np.array([1.0, 10.0, 100.0])
AC_RAW = write_raw('AC Analysis', 'frequency', F,
                   {'v(out)': np.array([100.0, 90.0 - 10j, 10.0 - 20j]),
                    'v(inp)': np.ones(3), 'v(inn)': np.zeros(3)})


class ScriptedEngine(SimEngine):
    """Answers every deck with the same raw text, or raises."""
    name = 'scripted'

    def __init__(self, raw, **kwargs):
        super(ScriptedEngine, self).__init__(**kwargs)
        self.raw = raw
        self.decks = []
        self.workdirs = []

    @property
    def exists(self):
        return True

    def execute(self, deck, workdir, timeout):
        self.decks.append(deck)
        self.workdirs.append(workdir)
        if isinstance(self.raw, Exception):
            raise self.raw
        return self.raw, 'scripted run\n'


def _ota():
    return read_netlist(os.path.join(benchmark_dir('5t_ota'), 'netlist.sp'))


def _tb():
    return TestbenchConfig(an.OPEN_LOOP, 0.9, LoadCondition(10e-12, 1e3))


def test_run():
    engine = ScriptedEngine(AC_RAW)
    result = engine.run('* deck\n.end\n')
    assert_equal(result.analysis, None)
    assert_equal(sorted(result.waveforms), ['v(inn)', 'v(inp)', 'v(out)'])
    assert_equal(result.engine_log, 'scripted run\n')
    assert not os.path.exists(engine.workdirs[0])


def test_simulate_labels_and_caches():
    cache = SimCache()
    engine = ScriptedEngine(AC_RAW, cache=cache)
    spec = AnalysisSpec.ac()
    first = engine.simulate(_ota(), spec, _tb())
    assert_equal(first.key, (an.AC, an.OPEN_LOOP))
    assert_equal(first.analysis, spec)
    second = engine.simulate(_ota(), spec, _tb())
    assert_equal(len(engine.decks), 1)
    assert_equal(cache.hits, 1)
    assert_almost_equal(m.dc_gain(m.transfer(second)), 40.0, 9)
    cm = TestbenchConfig(an.CM_DRIVE, 0.9, LoadCondition(10e-12, 1e3))
    engine.simulate(_ota(), spec, cm)
    assert_equal(len(engine.decks), 2)


def test_run_simulation_workdir():
    d = os.path.join(tempfile.mkdtemp(), 'runs', 'ac')
    engine = ScriptedEngine(AC_RAW)
    run_simulation('* deck\n.end\n', Limits(5.0, d), engine)
    assert_equal(engine.workdirs, [d])
    assert os.path.isdir(d)


def test_failures_propagate():
    log = '\n'.join('line {0}'.format(i) for i in range(40))
    engine = ScriptedEngine(ConvergenceFailure('timestep too small', log))
    try:
        engine.simulate(_ota(), AnalysisSpec.ac(), _tb())
    except SimulationError as e:
        assert isinstance(e, ConvergenceFailure)
        text = e.describe()
        assert text.startswith('ConvergenceFailure: timestep too small')
        assert 'line 39' in text
        assert 'line 19' not in text
    else:
        raise AssertionError("ConvergenceFailure not raised")
    assert_raises(ParseFailure, ScriptedEngine('nonsense\n').run, '* deck\n.end\n')


def test_result_from_raw():
    op = write_raw('Operating Point', 'v(out)', [0.9], {'i(vdd)': [-1e-3]})
    result = result_from_raw(op)
    assert_equal(result.waveforms, {})
    assert_almost_equal(result.op_point['v(out)'], 0.9, 12)
    assert_almost_equal(result.op_point['i(vdd)'], -1e-3, 12)
    const = write_raw('Constants', 'pi', [3.14], {'e': [2.72]})
    assert_raises(ParseFailure, result_from_raw, const)
    assert_raises(KeyError, result_from_raw(AC_RAW).waveform, 'v(nowhere)')


def test_log_excerpt():
    assert_equal(log_excerpt(''), '')
    assert_equal(log_excerpt('a\n\nb\n'), 'a\nb')
    assert_equal(len(log_excerpt('\n'.join(map(str, range(100)))).splitlines()), 20)


def test_missing_engine():
    engine = NgspiceEngine('/nonexistent/bin/ngspice-none')
    assert not engine.exists
    assert_raises(EngineNotFound, engine.run, '* deck\n.end\n')


#
# ngspice oracles
#

def _deck(body):
    return '* test\n{0}\n.control\nset filetype=ascii\nrun\nwrite sim.raw\n.endc\n.end\n'.format(
        body)


@needs_ngspice
def test_ngspice_rc_corner():
    deck = _deck('Vin in 0 DC 0 AC 1\nR1 in out 1k\nC1 out 0 1n\n.ac dec 50 1 1e9')
    result = run_simulation(deck, Limits(60.0, None), NgspiceEngine())
    h = m.transfer(result, inputs=(m.IN,))
    assert_allclose(m.corner_frequency(h), 1.0 / (2.0 * np.pi * 1e3 * 1e-9), rtol=1e-2)


@needs_ngspice
def test_ngspice_operating_point():
    deck = _deck('Vdd vdd 0 DC 1.8\nR1 vdd mid 1k\nR2 mid 0 2k\n.op')
    result = run_simulation(deck, engine=NgspiceEngine())
    assert_almost_equal(result.op_point['v(mid)'], 1.2, 6)
    assert_almost_equal(m.quiescent_power(result.op_point, 1.8), 1.8 * 0.6e-3, 9)


@needs_ngspice
def test_ngspice_timeout():
    deck = _deck('Vin in 0 SIN(0 1 1meg)\nR1 in out 1k\nC1 out 0 1n\n.tran 1p 10m 0 1p')
    assert_raises(Timeout, run_simulation, deck, Limits(0.5, None), NgspiceEngine())
