"""PySizing raw-file reader tests"""
import os
import tempfile

import numpy as np
from numpy.testing import assert_equal, assert_almost_equal, assert_raises, \
    assert_array_almost_equal

from pysizing.sim import rawfile
from pysizing.sim.errors import ParseFailure

OP_RAW = """Title: op test
Date: Thu Jan  1 00:00:00  2026
Plotname: Operating Point
Flags: real
No. Variables: 3
No. Points: 1
Variables:
	0	v(out)	voltage
	1	inp	voltage
	2	vdd#branch	current
Values:
 0	9.000000000000000e-01
	9.000000000000000e-01
	-2.666700000000000e-03
"""


def test_canonical_name():
    assert_equal(rawfile.canonical_name('vdd#branch'), 'i(vdd)')
    assert_equal(rawfile.canonical_name('V(OUT)'), 'v(out)')
    assert_equal(rawfile.canonical_name('out'), 'v(out)')
    assert_equal(rawfile.canonical_name('frequency'), 'frequency')
    assert_equal(rawfile.canonical_name('time'), 'time')


def test_transient_sine():
    t = np.linspace(0.0, 10e-3, 10000, endpoint=False)
    text = rawfile.write_raw('Transient Analysis', 'time', t,
                             {'v(out)': np.sin(2.0 * np.pi * 1e3 * t)})
    waves = rawfile.parse_raw(text)
    w = waves['v(out)']
    assert_equal(len(w), 10000)
    spectrum = np.abs(np.fft.rfft(w.values))
    freqs = np.fft.rfftfreq(len(w), t[1] - t[0])
    assert_almost_equal(freqs[np.argmax(spectrum)], 1e3, 6)


def test_ac_complex():
    f = np.array([1.0, 10.0, 100.0])
    h = np.array([1000.0 + 0j, 700.0 - 700.0j, 0.1j])
    text = rawfile.write_raw('AC Analysis', 'frequency', f, {'v(out)': h, 'v(inp)': np.ones(3)})
    plot = rawfile.parse_plots(text)[0]
    assert 'complex' in plot.flags
    assert_equal(plot.sweep_name, 'frequency')
    assert_array_almost_equal(plot.sweep, f)
    w = plot.waveforms()['v(out)']
    assert w.is_complex
    assert_array_almost_equal(w.values, h)
    assert_almost_equal(w.at(5.5).real, 850.0)


def test_operating_point():
    plot = rawfile.parse_plots(OP_RAW)[0]
    op = plot.op_point()
    assert_equal(list(op), ['v(out)', 'v(inp)', 'i(vdd)'])
    assert_almost_equal(op['i(vdd)'], -2.6667e-3, 15)
    assert_almost_equal(op['v(out)'], 0.9, 15)


def test_multiple_plots():
    text = OP_RAW + rawfile.write_raw('DC transfer characteristic', 'v-sweep',
                                      [0.0, 0.9, 1.8], {'v(out)': [0.1, 0.9, 1.7]})
    plots = rawfile.parse_plots(text)
    assert_equal(len(plots), 2)
    assert_equal(plots[1].npoints, 3)
    assert_array_almost_equal(plots[1].waveforms()['v(out)'].values, [0.1, 0.9, 1.7])


def test_read_raw():
    path = os.path.join(tempfile.mkdtemp(), 'sim.raw')
    with open(path, 'w') as f:
        f.write(OP_RAW)
    assert_equal(rawfile.read_raw(path)[0].plotname, 'Operating Point')


def test_make_waveform():
    w = rawfile.make_waveform('v(out)', [0.0, 1.0, 1.0, 2.0, 1.5, 3.0], [0, 1, 9, 2, 9, 3])
    assert_array_almost_equal(w.sweep, [0.0, 1.0, 2.0, 3.0])
    assert_array_almost_equal(w.values, [0, 1, 2, 3])
    w = rawfile.make_waveform('v(out)', [1.8, 0.9, 0.0], [3, 2, 1])
    assert_array_almost_equal(w.sweep, [0.0, 0.9, 1.8])
    assert_array_almost_equal(w.values, [1, 2, 3])
    assert_raises(ValueError, rawfile.make_waveform, 'v(out)', [0.0, 1.0], [1.0])


def test_bad_number_offset():
    text = rawfile.write_raw('Transient Analysis', 'time', [0.0, 1.0, 2.0],
                             {'v(out)': [0.5, 0.6, 0.7]})
    good = '6.000000000000000e-01'
    assert good in text
    text = text.replace(good, 'garbage')
    try:
        rawfile.parse_plots(text)
    except ParseFailure as e:
        assert_equal(text.encode('utf-8')[e.offset:e.offset + 7], b'garbage')
    else:
        raise AssertionError("ParseFailure not raised")


def test_malformed():
    assert_raises(ParseFailure, rawfile.parse_plots, '')
    assert_raises(ParseFailure, rawfile.parse_plots, 'Title: x\nBinary:\n')
    truncated = OP_RAW.rsplit('\n', 2)[0] + '\n'
    assert_raises(ParseFailure, rawfile.parse_plots, truncated)
    no_values = OP_RAW.split('Values:')[0]
    assert_raises(ParseFailure, rawfile.parse_plots, no_values)
    bad_index = OP_RAW.replace(' 0\t9.0', ' 5\t9.0')
    assert_raises(ParseFailure, rawfile.parse_plots, bad_index)
