"""PySizing metrics tests"""
import math

import numpy as np
from numpy.testing import assert_equal, assert_almost_equal, assert_raises, \
    assert_allclose
from scipy import signal

from pysizing import metrics as m
from pysizing.bins import decade_space, sweep_space
from pysizing.sim import analysis as an
from pysizing.sim.analysis import AnalysisSpec, LoadCondition, Sine, TestbenchConfig
from pysizing.sim.engine import SimResult
from pysizing.sim.rawfile import Waveform
from pysizing.targets import get_group


def _response(num, den, f):
    _, h = signal.freqs(num, den, worN=2.0 * np.pi * f)
    return Waveform('h', f, h)


def _single_pole(a0=1000.0, pole=1e3, f=None):
    f = decade_space(1.0, 1e10, 20) if f is None else f
    return _response([a0], [1.0 / (2.0 * np.pi * pole), 1.0], f)


def _two_pole(a0=1000.0, p1=1e3, p2=10e6, f=None):
    f = decade_space(1.0, 1e10, 20) if f is None else f
    den = np.polymul([1.0 / (2.0 * np.pi * p1), 1.0], [1.0 / (2.0 * np.pi * p2), 1.0])
    return _response([a0], den, f)


# uniform time base on which the last 8 periods of 1 kHz resample exactly
DT = 8e-3 / 2 ** 15
T = np.arange(81921) * DT


def _tone(*harmonics):
    y = 0.9 + np.sin(2.0 * np.pi * 1e3 * T)
    for k, a in harmonics:
        y = y + a * np.sin(2.0 * np.pi * k * 1e3 * T)
    return Waveform('v(out)', T, y)


def _follower(lo=0.0, hi=1.8, shift=0.0, step=1e-3):
    x = sweep_space(0.0, 1.8, step)
    return Waveform('v(out)', x, np.clip(x + shift, lo, hi))


#
# frequency domain
#

def test_dc_gain():
    assert_almost_equal(m.dc_gain(Waveform('h', np.array([1.0, 10.0]),
                                           np.array([1000.0, 1000.0]))), 60.0, 9)
    assert_almost_equal(m.dc_gain(Waveform('h', np.array([1.0, 10.0]),
                                           np.array([1.0, 1.0]))), 0.0, 9)
    assert_almost_equal(m.dc_gain(_single_pole(2489.0, 10e3)), 67.92, 1)
    assert_raises(m.DegenerateInput, m.dc_gain,
                  Waveform('h', np.array([1.0, 10.0]), np.array([0.0, 0.0])))


def test_single_pole_oracle():
    h = _single_pole()
    assert_almost_equal(m.dc_gain(h), 60.0, 2)
    ugbw = m.unity_gain_bandwidth(h)
    assert_allclose(ugbw, 1e3 * math.sqrt(1000.0 ** 2 - 1.0), rtol=1e-3)
    pm = m.phase_margin(h)
    assert abs(pm - (180.0 - math.degrees(math.atan(999.9995)))) < 0.05


def test_ugbw_no_crossing():
    f = decade_space(1.0, 1e9, 20)
    assert_raises(m.NoCrossing, m.unity_gain_bandwidth, Waveform('h', f, 0.5 * np.ones(len(f))))
    assert_raises(m.NoCrossing, m.unity_gain_bandwidth, Waveform('h', f, 2.0 * np.ones(len(f))))
    assert_raises(m.NoCrossing, m.phase_margin, Waveform('h', f, 0.5 * np.ones(len(f))))


def test_two_pole_brute_force():
    h = _two_pole()
    dense = np.logspace(0.0, 10.0, 10 ** 6)
    hd = _two_pole(f=dense).values
    i = np.flatnonzero(np.abs(hd) < 1.0)[0]
    oracle_f = dense[i]
    oracle_pm = 180.0 + np.degrees(np.angle(hd[i]))
    assert_allclose(m.unity_gain_bandwidth(h), oracle_f, rtol=1e-3)
    assert abs(m.phase_margin(h) - oracle_pm) < 0.1


def test_integrator_phase_margin():
    f = decade_space(1.0, 1e9, 20)
    h = Waveform('h', f, 1.0 / (1j * f / 1e6))
    assert_almost_equal(m.phase_margin(h), 90.0, 6)


def test_inverting_polarity():
    h = _single_pole()
    inverted = Waveform('h', h.sweep, -h.values)
    assert_almost_equal(m.phase_margin(inverted), m.phase_margin(h), 9)
    assert_almost_equal(m.dc_gain(inverted), m.dc_gain(h), 9)


def test_ugbw_interpolation_consistency():
    coarse = m.unity_gain_bandwidth(_single_pole(f=decade_space(1.0, 1e10, 20)))
    fine = m.unity_gain_bandwidth(_single_pole(f=decade_space(1.0, 1e10, 40)))
    assert abs(fine - coarse) / fine < 5e-4


def test_corner_frequency():
    assert_allclose(m.corner_frequency(_single_pole(10.0, 1e3)), 1e3, rtol=1e-2)
    f = decade_space(1.0, 1e6, 20)
    assert_raises(m.NoCrossing, m.corner_frequency, Waveform('h', f, np.ones(len(f))))


def test_cmrr():
    f = np.array([1.0, 10.0])
    dm = Waveform('dm', f, np.array([1000.0, 1000.0]))
    assert_almost_equal(m.cmrr(dm, Waveform('cm', f, np.array([0.1, 0.1]))), 80.0, 9)
    assert_almost_equal(m.cmrr(dm, dm), 0.0, 9)
    acm = 2489.0 / 10.0 ** (110.76 / 20.0)
    assert_almost_equal(m.cmrr(Waveform('dm', f, np.array([2489.0, 2489.0])),
                               Waveform('cm', f, np.array([acm, acm]))), 110.76, 9)
    assert_raises(m.DegenerateInput, m.cmrr, dm, Waveform('cm', f, np.zeros(2)))
    assert_raises(ValueError, m.cmrr, dm, Waveform('cm', np.array([1.0, 2.0, 3.0]),
                                                   np.ones(3)))


#
# operating point, DC and transient
#

def test_quiescent_power():
    assert_almost_equal(m.quiescent_power({'i(vdd)': -2.6667e-3}, 1.8) * 1e3, 4.80, 3)
    assert_almost_equal(m.quiescent_power({'i(vdd)': 7.3444e-3}, 1.8) * 1e3, 13.22, 3)
    assert_equal(m.quiescent_power({'i(vdd)': 0.0}, 1.8), 0.0)
    assert_almost_equal(m.quiescent_power({'i(vsup)': 1e-3}, 1.8, 'Vsup'), 1.8e-3, 12)
    assert_raises(m.MissingBranch, m.quiescent_power, {'v(out)': 0.9}, 1.8)


def test_thd():
    assert_almost_equal(m.thd(_tone((2, 0.05)), 1e3), 20.0 * math.log10(0.05), 1)
    assert abs(m.thd(_tone((2, 0.05)), 1e3) + 26.02) < 0.05
    assert abs(m.thd(_tone((2, 0.03), (3, 0.04)), 1e3) + 26.02) < 0.05
    assert m.thd(_tone(), 1e3) < -120.0


def test_thd_scale_invariance():
    y = _tone((2, 0.02), (5, 0.01))
    scaled = Waveform(y.name, y.sweep, 3.0 * y.values)
    assert_almost_equal(m.thd(scaled, 1e3), m.thd(y, 1e3), 6)


def test_thd_short_record():
    t = np.linspace(0.0, 10e-3, 10001)
    y = Waveform('v(out)', t, np.sin(2.0 * np.pi * 1e3 * t))
    assert_raises(m.InsufficientRecord, m.thd, y, 1e3)


def test_thd_resamples_adaptive_steps():
    rng = np.random.default_rng(5)
    t = np.sort(np.concatenate([[0.0, 20e-3], rng.uniform(0.0, 20e-3, 200000)]))
    y = Waveform('v(out)', t, np.sin(2.0 * np.pi * 1e3 * t) +
                 0.05 * np.sin(4.0 * np.pi * 1e3 * t))
    assert abs(m.thd(y, 1e3) + 26.02) < 0.05


def test_input_offset():
    assert_almost_equal(m.input_offset(_follower()), 0.0, 12)
    assert_almost_equal(m.input_offset(_follower(shift=1e-3)), 1e-3, 6)
    assert_almost_equal(m.input_offset(_follower(shift=-1e-3)), 1e-3, 6)
    assert_almost_equal(m.signed_offset(_follower(shift=-1e-3)), -1e-3, 6)
    x = sweep_space(0.0, 1.8, 1e-3)
    finite = Waveform('v(out)', x, x * 2489.0 / 2490.0)
    assert_almost_equal(m.input_offset(finite), 0.9 / 2490.0, 9)
    short = Waveform('v(out)', sweep_space(0.0, 0.5, 0.01), sweep_space(0.0, 0.5, 0.01))
    assert_raises(m.DegenerateInput, m.input_offset, short)


def test_output_range():
    assert_almost_equal(m.output_range(_follower(), 1.8), 1.8, 9)
    assert_almost_equal(m.output_range(_follower(0.06, 1.74), 1.8), 1.68, 9)
    x = sweep_space(0.0, 1.8, 1e-3)
    assert_raises(m.EmptyRange, m.output_range, Waveform('v(out)', x, 0.9 * np.ones(len(x))))


def test_output_range_monotonic():
    spans = [m.output_range(_follower(0.9 - w, 0.9 + w), 1.8)
             for w in (0.1, 0.3, 0.5, 0.7, 0.84, 0.9)]
    assert all(a <= b for a, b in zip(spans[:-1], spans[1:]))


def test_output_range_stops_at_the_knees():
    # slope 0.5 outside [0.5, 1.3]; only the tracking part counts
    x = sweep_space(0.0, 1.8, 1e-3)
    y = np.where(x < 0.5, 0.25 + 0.5 * x, np.where(x > 1.3, 0.65 + 0.5 * x, x))
    assert_almost_equal(m.output_range(Waveform('v(out)', x, y), 1.8), 0.8, 6)


def test_output_range_largest_run():
    # two tracking regions split by a flat step; the wider one wins
    x = sweep_space(0.0, 1.8, 1e-3)
    y = np.where(x < 0.5, x, np.where(x < 0.6, 0.5, x - 0.1))
    assert_almost_equal(m.output_range(Waveform('v(out)', x, y), 1.8), 1.7 - 0.5, 2)


def test_switching_error():
    x = sweep_space(0.0, 1.8, 1e-3)
    y = 1.8 / (1.0 + np.exp((x - 0.95) / 0.02))
    assert_almost_equal(m.switching_error(Waveform('v(out)', x, y), 1.8), 0.05, 4)
    assert_raises(m.NoCrossing, m.switching_error, Waveform('v(out)', x, np.zeros(len(x))),
                  1.8)


def test_oscillation_frequency():
    t = np.linspace(0.0, 2e-6, 20001)
    y = Waveform('v(out)', t, 0.9 + 0.9 * np.sin(2.0 * np.pi * 1e7 * t))
    assert_allclose(m.oscillation_frequency(y), 1e7, rtol=1e-3)
    assert_raises(m.NoCrossing, m.oscillation_frequency,
                  Waveform('v(out)', t, 0.9 * np.ones(len(t))))


#
# reports
#

def _ac_result(h, topology, cm=False):
    n = len(h.sweep)
    if cm:
        signals = {m.OUT: h.values, m.CM: np.ones(n, dtype=complex)}
    else:
        signals = {m.OUT: h.values, m.INP: 0.5 * np.ones(n, dtype=complex),
                   m.INN: -0.5 * np.ones(n, dtype=complex)}
    waveforms = dict((k, Waveform(k, h.sweep, v)) for k, v in signals.items())
    tb = TestbenchConfig(topology, 0.9, LoadCondition(10e-12, 1e3))
    return SimResult(AnalysisSpec.ac(), tb, waveforms, {}, 0.0, '')


def _g1_results():
    load = LoadCondition(10e-12, 1e3)
    h = _single_pole(2489.0, 10e3)
    acm = 2489.0 / 10.0 ** (110.76 / 20.0)
    cm = Waveform('h', h.sweep, acm * np.ones(len(h.sweep), dtype=complex))
    op = SimResult(AnalysisSpec.op(), TestbenchConfig(an.OPEN_LOOP, 0.9, load), {},
                   {'i(vdd)': -2.6667e-3, 'v(out)': 0.9}, 0.0, '')
    dc_wave = _follower(0.06, 1.74, shift=0.98e-3)
    dc = SimResult(AnalysisSpec.dc('Vtb_in', 0.0, 1.8, 1e-3),
                   TestbenchConfig(an.UNITY_GAIN, 0.9, load), {m.OUT: dc_wave}, {}, 0.0, '')
    tran = SimResult(AnalysisSpec.tran(DT, 20e-3),
                     TestbenchConfig(an.UNITY_GAIN, 0.9, load, Sine(0.8, 1e3)),
                     {m.OUT: _tone((2, 0.05))}, {}, 0.0, '')
    return [_ac_result(h, an.OPEN_LOOP), _ac_result(cm, an.CM_DRIVE, cm=True), op, dc, tran]


def test_assemble_report_g1():
    report = m.assemble_report(_g1_results(), get_group('G1'), design_point_id=3)
    assert_equal(report.kinds(), list(m.OPAMP_KINDS))
    assert_equal(report.design_point_id, 3)
    assert_equal(report.load, LoadCondition(10e-12, 1e3))
    assert_almost_equal(report.get(m.GAIN_DB), 67.92, 1)
    assert_almost_equal(report.get(m.CMRR_DB), 110.76, 6)
    assert_almost_equal(report.get(m.POWER_W) * 1e3, 4.80, 3)
    assert_almost_equal(report.get(m.OFFSET_V) * 1e3, 0.98, 6)
    # the last sample before the upper clip tracks at 1.73998 V
    assert_almost_equal(report.get(m.OUTPUT_RANGE_V), 1.67998, 6)
    assert abs(report.get(m.THD_DB) + 26.02) < 0.05
    assert_equal(len(report.absent), 0)


def test_assemble_report_incomplete():
    results = _g1_results()[:1]
    try:
        m.assemble_report(results, get_group('G1'))
    except m.IncompleteInputs as e:
        kinds = set(k for k, _ in e.missing)
        assert_equal(kinds, set([an.AC, an.OP, an.DC_SWEEP, an.TRAN]))
    else:
        raise AssertionError("IncompleteInputs not raised")


def test_assemble_report_partial():
    results = _g1_results()
    f = results[0].waveforms[m.OUT].sweep
    results[0] = _ac_result(Waveform('h', f, 0.5 * np.ones(len(f), dtype=complex)),
                            an.OPEN_LOOP)
    report = m.assemble_report(results, get_group('G1'))
    assert m.UGBW_HZ in report.absent
    assert m.PM_DEG in report.absent
    assert 'NoCrossing' in report.absent[m.UGBW_HZ]
    assert m.POWER_W in report
    assert m.GAIN_DB in report


def test_assemble_report_failed_simulation():
    results = [r for r in _g1_results() if r.analysis.kind != an.TRAN]
    report = m.assemble_report(results, get_group('G1'),
                               failed={(an.TRAN, an.UNITY_GAIN): 'ConvergenceFailure'})
    assert_equal(report.absent[m.THD_DB], 'ConvergenceFailure')
    assert_equal(len(report.values), 7)


def test_cmrr_ceiling():
    results = _g1_results()
    f = results[1].waveforms[m.OUT].sweep
    results[1] = _ac_result(Waveform('h', f, np.zeros(len(f), dtype=complex)), an.CM_DRIVE,
                            cm=True)
    report = m.assemble_report(results, get_group('G1'))
    assert_equal(report.get(m.CMRR_DB), m.CMRR_CEILING_DB)
    assert m.CMRR_DB in report.notes


def test_report_dict_round_trip():
    report = m.assemble_report(_g1_results(), get_group('G1'), design_point_id=1)
    assert_equal(m.report_from_dict(report.to_dict()), report)


def test_report_display_units():
    data = {'values': {'ugbw': 19.95, 'offset': 0.98, 'power': 4.8, 'pm': 61.59}}
    report = m.report_from_dict(data, display_units=True)
    assert_almost_equal(report.get(m.UGBW_HZ), 19.95e6, 3)
    assert_almost_equal(report.get(m.OFFSET_V), 0.98e-3, 12)
    assert_almost_equal(report.get(m.POWER_W), 4.8e-3, 12)
    assert_equal(report.get(m.PM_DEG), 61.59)
    assert_equal(report.get(m.GAIN_DB), None)


def test_metric_value_invariants():
    assert_raises(ValueError, m.MetricValue, m.GAIN_DB, float('nan'))
    assert_raises(ValueError, m.MetricValue, m.UGBW_HZ, 0.0)
    assert_equal(m.MetricValue(m.GAIN_DB, 60).value, 60.0)


def test_format_metric():
    assert_equal(m.format_metric(m.UGBW_HZ, 19.95e6), '19.95 MHz')
    assert_equal(m.format_metric(m.OFFSET_V, 0.98e-3), '0.98 mV')
    assert_equal(m.display_value(m.PM_DEG, 52.25), '52.25°')


def test_kind_from_name():
    assert_equal(m.kind_from_name('UGBW'), m.UGBW_HZ)
    assert_equal(m.kind_from_name('range'), m.OUTPUT_RANGE_V)
    assert_equal(m.kind_from_name('thd_db'), m.THD_DB)
    assert_raises(ValueError, m.kind_from_name, 'slew')


def test_required_analyses():
    assert_equal(m.required_analyses(m.CMRR_DB), ((an.AC, an.OPEN_LOOP), (an.AC, an.CM_DRIVE)))
    assert_equal(m.required_analyses(m.OSC_FREQ_HZ, an.OSCILLATOR), ((an.TRAN, an.FREE_RUN),))
    assert_raises(m.ConfigurationError, m.required_analyses, m.THD_DB, an.OSCILLATOR)
