"""PySizing command-line tests"""
import os
import math
import logging
import tempfile

import pytest
from numpy.testing import assert_equal, assert_raises

try:
    import simplejson as json
except ImportError:
    import json

from pysizing import cli
from pysizing import llm
from pysizing import metrics as m
from pysizing import targets as tg
from pysizing.agent import loop
from pysizing.netlist import read_netlist
from pysizing.pysizing_config import pysizing_conf
from pysizing.utils import ConfigurationError

G1_PASS = {'gain': 67.91, 'ugbw': 19.95, 'pm': 61.59, 'power': 4.8, 'cmrr': 110.76,
           'thd': -26.06, 'offset': 0.98, 'range': 1.68}
G1_FAIL = {'gain': 68.63, 'ugbw': 19.95, 'pm': 72.26, 'power': 13.22, 'cmrr': 97.63,
           'thd': -26.09, 'offset': 5.30, 'range': 1.24}


def _evaluate(failure=None):
    """Stands in for simulation: 30 dB at the shipped load length, +20 dB per decade."""
    def evaluate(doc, plan, group, simulator, family, supply_source='vdd',
                 design_point_id=None, workdir=None, conf=None):
        gain = 30.0 + 20.0 * math.log10(doc.element('M3').param('L').magnitude / 0.36e-6)
        values = {m.GAIN_DB: m.MetricValue(m.GAIN_DB, gain, 'AC OPEN_LOOP')}
        return m.MetricReport(values, group.load, design_point_id), failure
    return evaluate


@pytest.fixture
def stub_sim(monkeypatch):
    monkeypatch.setattr(loop, 'evaluate', _evaluate())
    monkeypatch.setattr(cli, 'evaluate', _evaluate())
    monkeypatch.setattr(cli, 'make_simulator', lambda circuit, conf: object())
    monkeypatch.delenv('PYSIZING_CONFIG', raising=False)


def _report_file(values):
    d = tempfile.mkdtemp()
    path = os.path.join(d, 'report.json')
    with open(path, 'w') as f:
        json.dump({'values': values}, f)
    return path


def test_run_config():
    run = cli.RunConfig('amp.sp', 'G1', cli.BASELINE)
    assert_equal(run.transcript_mode, llm.LIVE)
    assert_equal(run.seed, 0)
    run = cli.RunConfig('amp.sp', 'G1', cli.LLM, transcript='t.jsonl')
    assert_equal(run.transcript_mode, llm.RECORD)
    assert_raises(ConfigurationError, cli.RunConfig, 'amp.sp', 'G1', 'gpt')
    assert_raises(ConfigurationError, cli.RunConfig, 'amp.sp', 'G1', cli.BASELINE, budget=0)
    assert_raises(ConfigurationError, cli.RunConfig, 'amp.sp', 'G1', cli.LLM,
                  transcript_mode=llm.REPLAY)
    assert_raises(ConfigurationError, cli.RunConfig, 'amp.sp', 'G1', cli.LLM,
                  transcript='t.jsonl', transcript_mode='rewind')


def test_usage_errors_are_configuration_errors():
    for argv in ([], ['size', '--engine', 'gpt'], ['check', '--group', 'G1'],
                 ['frobnicate']):
        with pytest.raises(SystemExit) as exc:
            cli.main(argv)
        assert_equal(exc.value.code, cli.EXIT_CONFIG)


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(['--version'])
    assert_equal(exc.value.code, 0)
    assert capsys.readouterr().out.startswith('pysizing ')


def test_targets(capsys):
    assert_equal(cli.main(['targets']), cli.EXIT_OK)
    out = capsys.readouterr().out
    assert 'G1: load 10pF, 1kΩ, budget 25' in out
    assert 'pm >= 55 deg (accepted >= 52.25 deg)' in out
    assert_equal(cli.main(['targets', '--dump', 'G2']), cli.EXIT_OK)
    group = tg.group_from_dict(json.loads(capsys.readouterr().out))
    assert_equal(group.name, 'G2')
    assert_equal(group.kinds, tg.get_group('G2').kinds)


def test_check(capsys):
    path = _report_file(G1_PASS)
    assert_equal(cli.main(['check', '--report', path, '--group', 'G1', '--display-units']),
                 cli.EXIT_OK)
    assert 'overall: pass' in capsys.readouterr().out
    path = _report_file(G1_FAIL)
    assert_equal(cli.main(['check', '--report', path, '--group', 'G1', '--display-units']),
                 cli.EXIT_UNMET)
    out = capsys.readouterr().out
    assert 'overall: fail' in out
    assert 'FAIL' in out
    assert_equal(cli.main(['check', '--report', '/nonexistent/report.json',
                           '--group', 'G1']), cli.EXIT_CONFIG)
    assert_equal(cli.main(['check', '--report', path, '--group', 'G9']), cli.EXIT_CONFIG)


def test_check_missing_metric(capsys):
    values = dict(G1_PASS)
    del values['thd']
    path = _report_file(values)
    assert_equal(cli.main(['check', '--report', path, '--group', 'G1', '--display-units']),
                 cli.EXIT_UNMET)
    assert 'missing: thd' in capsys.readouterr().out


def test_size(stub_sim, capsys):
    d = tempfile.mkdtemp()
    status = cli.main(['--workdir', d, 'size', '--circuit', '5t_ota', '--engine', 'baseline',
                       '--seed', '1'])
    assert_equal(status, cli.EXIT_OK)
    last = capsys.readouterr().out.strip().splitlines()[-1]
    assert last.startswith('status=SUCCESS iters=')
    for name in ('final.sp', 'reasons.md', 'report.json', 'trace.csv', 'iterations.jsonl',
                 'run-manifest.json'):
        assert os.path.exists(os.path.join(d, name)), name
    with open(os.path.join(d, 'run-manifest.json')) as f:
        manifest = json.load(f)
    assert_equal(manifest['status'], 'SUCCESS')
    assert_equal(manifest['command'], 'size')
    with open(os.path.join(d, 'report.json')) as f:
        report = json.load(f)
    assert report['check']['overall_pass']
    assert_equal(report['iterations'], int(last.split('iters=')[1]))
    final = read_netlist(os.path.join(d, 'final.sp'))
    assert_equal(final.element('vdd').param('DC').magnitude, 1.8)
    assert final.element('M3').param('L').magnitude > 0.36e-6


def test_size_budget(stub_sim, capsys):
    d = tempfile.mkdtemp()
    status = cli.main(['--workdir', d, 'size', '--circuit', '5t_ota', '--budget', '2'])
    assert_equal(status, cli.EXIT_UNMET)
    last = capsys.readouterr().out.strip().splitlines()[-1]
    assert_equal(last, 'status=BUDGET_EXHAUSTED iters=2')


def test_missing_api_key(stub_sim, monkeypatch, capsys):
    monkeypatch.delenv(pysizing_conf['provider']['api_key_env'], raising=False)
    d = tempfile.mkdtemp()
    status = cli.main(['--workdir', d, 'size', '--circuit', '5t_ota', '--engine', 'llm'])
    assert_equal(status, cli.EXIT_CONFIG)
    assert 'authentication' in capsys.readouterr().err
    assert not os.path.exists(os.path.join(d, 'iterations.jsonl'))


def test_missing_netlist():
    d = tempfile.mkdtemp()
    assert_equal(cli.main(['--workdir', d, 'size', '--netlist', '/nonexistent/amp.sp']),
                 cli.EXIT_CONFIG)
    assert_equal(cli.main(['--workdir', d, 'size']), cli.EXIT_CONFIG)
    assert_equal(cli.main(['--workdir', d, 'size', '--circuit', 'adc']), cli.EXIT_CONFIG)


def test_measure(stub_sim, capsys):
    d = tempfile.mkdtemp()
    assert_equal(cli.main(['--workdir', d, 'measure', '--circuit', '5t_ota']), cli.EXIT_OK)
    assert 'Gain' in capsys.readouterr().out
    with open(os.path.join(d, 'report.json')) as f:
        data = json.load(f)
    assert_equal(data['analyses'], [['AC', 'OPEN_LOOP']])
    assert_equal(data['report']['values'][m.GAIN_DB], 30.0)


def test_measure_simulation_failure(stub_sim, monkeypatch):
    monkeypatch.setattr(cli, 'evaluate', _evaluate('AC OPEN_LOOP: timestep too small'))
    d = tempfile.mkdtemp()
    assert_equal(cli.main(['--workdir', d, 'measure', '--circuit', '5t_ota']),
                 cli.EXIT_SIMULATION)


def test_measurement_group():
    group = cli.measurement_group(tg.get_group('G1'), [m.GAIN_DB, m.SWITCH_ERROR_V])
    assert_equal(group.kinds, [m.GAIN_DB, m.SWITCH_ERROR_V])
    assert_equal(group[m.GAIN_DB].value, 65.0)
    assert_equal(group.load, tg.get_group('G1').load)


def test_scrub_filter():
    filt = cli.ScrubFilter(['PROVIDER_KEY'], {'PROVIDER_KEY': 'sk-secret-42'})
    record = logging.LogRecord('pysizing', logging.INFO, __file__, 1, 'sent %s',
                               ('sk-secret-42',), None)
    assert filt.filter(record)
    assert_equal(record.getMessage(), 'sent ${PROVIDER_KEY}')
