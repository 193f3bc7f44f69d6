"""PySizing deck assembly tests"""
import os

from numpy.testing import assert_equal, assert_raises

from pysizing import metrics as m
from pysizing.bench.circuits import DATA_DIR, benchmark_dir
from pysizing.netlist import read_netlist
from pysizing.sim import analysis as an
from pysizing.sim import deck as dk
from pysizing.sim.analysis import AnalysisSpec, LoadCondition, Sine, TestbenchConfig
from pysizing.sim.errors import MissingPort

LOAD = LoadCondition(10e-12, 1e3)


def _ota():
    return read_netlist(os.path.join(benchmark_dir('5t_ota'), 'netlist.sp'))


def _tb(topology=an.OPEN_LOOP, stimulus=None):
    return TestbenchConfig(topology, 0.9, LOAD, stimulus)


def test_plan_all_opamp_metrics():
    plan = dk.plan_analyses(m.OPAMP_KINDS, _tb())
    keys = [(spec.kind, tb.topology) for spec, tb in plan]
    assert_equal(keys, [(an.AC, an.OPEN_LOOP), (an.AC, an.CM_DRIVE), (an.OP, an.OPEN_LOOP),
                        (an.DC_SWEEP, an.UNITY_GAIN), (an.TRAN, an.UNITY_GAIN)])
    tran_tb = plan[-1][1]
    assert_equal(tran_tb.stimulus, Sine(0.8, 1e3))
    for _, tb in plan:
        assert_equal(tb.load, LOAD)
        assert_equal(tb.vcm, 0.9)


def test_plan_merges_duplicates():
    plan = dk.plan_analyses([m.GAIN_DB, m.UGBW_HZ, m.PM_DEG], _tb())
    assert_equal(len(plan), 1)
    assert_equal(plan[0][0], AnalysisSpec.ac(20, 1.0, 1e10))
    plan = dk.plan_analyses([m.POWER_W], _tb())
    assert_equal([(s.kind, t.topology) for s, t in plan], [(an.OP, an.OPEN_LOOP)])


def test_plan_single_ended_and_free_running():
    tb = TestbenchConfig(an.SINGLE_ENDED, 0.0, LOAD)
    plan = dk.plan_analyses([m.SWITCH_ERROR_V, m.POWER_W], tb)
    assert_equal([(s.kind, t.topology) for s, t in plan],
                 [(an.OP, an.SINGLE_ENDED), (an.DC_SWEEP, an.SINGLE_ENDED)])
    tran = AnalysisSpec.tran(10e-12, 20e-9, uic=True)
    plan = dk.plan_analyses([m.OSC_FREQ_HZ], TestbenchConfig(an.FREE_RUN, 0.0, LOAD),
                            tran=tran)
    assert_equal(plan[0][0], tran)
    assert_raises(ValueError, dk.plan_analyses, [], _tb())


def test_default_dc_sweep():
    spec = dk.default_spec(an.DC_SWEEP, _tb(an.UNITY_GAIN))
    assert_equal((spec.source, spec.start, spec.stop, spec.step), ('Vtb_in', 0.0, 1.8, 1e-3))


def test_open_loop_ac_deck():
    doc = _ota()
    deck = dk.build_deck(doc, AnalysisSpec.ac(), _tb(), benchmark_dir('5t_ota'))
    lines = deck.splitlines()
    assert 'Ctb_load out 0 1e-11' in lines
    assert 'Rtb_load out 0 1000' in lines
    assert 'Vtb_ind inp tb_cm DC 0 AC 1' in lines
    assert 'Ltb_fb out inn 1e9' in lines
    assert '.ac dec 20 1 10000000000' in lines
    assert '.include "{0}"'.format(os.path.join(DATA_DIR, 'ptm180.lib')) in lines
    assert 'M1 x inp t 0 nch W=4u L=0.36u' in lines
    assert_equal([l for l in lines if l.strip().lower() == '.end'], ['.end'])
    assert_equal(lines[-1], '.end')
    # the raw reader only parses ASCII output
    assert 'set filetype=ascii' in lines
    assert 'write {0}'.format(dk.RAW_NAME) in lines
    assert_equal(deck, dk.build_deck(doc, AnalysisSpec.ac(), _tb(), benchmark_dir('5t_ota')))


def test_unity_gain_decks():
    doc = _ota()
    tb = _tb(an.UNITY_GAIN)
    deck = dk.build_deck(doc, dk.default_spec(an.DC_SWEEP, tb), tb)
    assert '.dc vtb_in 0 1.8 0.001' in deck
    assert 'Vtb_fb out inn DC 0' in deck
    tb = _tb(an.UNITY_GAIN, Sine(0.8, 1e3))
    deck = dk.build_deck(doc, dk.default_spec(an.TRAN, tb), tb)
    assert 'Vtb_in inp 0 DC 0.9 SIN(0.9 0.8 1000)' in deck
    assert '\n.tran ' in deck


def test_common_mode_deck():
    tb = _tb(an.CM_DRIVE)
    deck = dk.build_deck(_ota(), AnalysisSpec.ac(), tb)
    assert 'Vtb_cm tb_cm 0 DC 0.9 AC 1' in deck
    assert 'Vtb_ind inp tb_cm DC 0' in deck


def test_cards():
    assert_equal(dk.analysis_card(AnalysisSpec.op()), '.op')
    assert_equal(dk.analysis_card(AnalysisSpec.tran(1e-11, 2e-8, uic=True)),
                 '.tran 1e-11 2e-08 0 1e-11 uic')
    cards = dk.harness_cards(AnalysisSpec.op(), TestbenchConfig(
        an.SINGLE_ENDED, 0.0, LOAD, extras=['Vtb_b b 0 DC 1.8']))
    assert_equal(cards[0], 'Vtb_in in 0 DC 0')
    assert_equal(cards[-1], 'Vtb_b b 0 DC 1.8')


def test_missing_port():
    inverter = read_netlist(os.path.join(benchmark_dir('inverter'), 'netlist.sp'))
    assert_raises(MissingPort, dk.build_deck, inverter, AnalysisSpec.ac(), _tb())
    dk.check_ports(inverter, TestbenchConfig(an.SINGLE_ENDED, 0.0, LOAD))


def test_rewrite_includes():
    text = ".include ../models.lib\n.lib '/abs/path.lib' tt\nR1 a 0 1k"
    out = dk.rewrite_includes(text, '/work/circuit')
    assert '.include "/work/models.lib"' in out
    assert ".lib '/abs/path.lib' tt" in out
    assert_equal(dk.rewrite_includes(text, None), text)
