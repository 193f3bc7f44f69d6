"""Iteration records and the context history the proposal engines read."""
import logging
from collections import namedtuple

try:
    import simplejson as json
except ImportError:
    import json

from pysizing import targets as tg

logger = logging.getLogger(__name__)

SUCCESS = 'SUCCESS'
BUDGET_EXHAUSTED = 'BUDGET_EXHAUSTED'
ABORTED = 'ABORTED'
STATUSES = (SUCCESS, BUDGET_EXHAUSTED, ABORTED)


class IterationRecord(namedtuple('IterationRecord', ['index', 'patch', 'design', 'report',
                                                     'failure', 'check', 'rationale',
                                                     'wallclock'])):
    """What happened in one iteration.

    Parameters
    ----------
    index : int
        1-based.
    patch : ParamPatch
        The change applied this iteration (empty for the baseline evaluation).
    design : OrderedDict of (key, param) -> float
        Tunable values of the simulated design point.
    report : MetricReport or None
        None when no simulation could be assembled at all.
    failure : str or None
        Simulation or engine failures observed this iteration.
    check : CheckResult
    rationale : str
    wallclock : float
        Seconds spent on the iteration.

    """
    __slots__ = ()

    @property
    def passed(self):
        return self.check.overall_pass

    def to_dict(self, timing=True):
        d = {'index': self.index,
             'patch': self.patch.to_dict(),
             'design': [[k, p, v] for (k, p), v in self.design.items()],
             'report': None if self.report is None else self.report.to_dict(),
             'failure': self.failure,
             'check': self.check.to_dict(),
             'rationale': self.rationale}
        if timing:
            d['wallclock'] = self.wallclock
        return d


class ContextHistory(object):
    """Everything the loop has observed so far.

    Parameters
    ----------
    circuit_type : str
    baseline : NetlistDoc
    group : TargetGroup
    tunables : list of TunableParam
    tb_base : TestbenchConfig, optional
        Shared testbench settings of the run.

    """

    def __init__(self, circuit_type, baseline, group, tunables, tb_base=None):
        self.circuit_type = circuit_type
        self.baseline = baseline
        self.group = group
        self.tunables = list(tunables)
        self.tb_base = tb_base
        self.records = []

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def append(self, record):
        if record.index != len(self.records) + 1:
            raise ValueError("record {0} appended after {1} records".format(
                             record.index, len(self.records)))
        if len(self.records) >= self.group.max_iterations:
            raise ValueError("history already holds the {0}-iteration budget".format(
                             self.group.max_iterations))
        self.records.append(record)

    @property
    def last(self):
        return self.records[-1] if self.records else None

    def rank(self, record):
        """Sort key: passing verdict first, then :func:`pysizing.targets.score`."""
        return (record.check.overall_pass,) + tg.score(record.check, self.group)

    def best(self):
        """The best record so far; the earliest one on ties."""
        best = None
        for rec in self.records:
            if best is None or self.rank(rec) > self.rank(best):
                best = rec
        return best


class OptimizationOutcome(namedtuple('OptimizationOutcome', ['status', 'final_netlist',
                                                             'history', 'iterations_used'])):
    __slots__ = ()

    @property
    def success(self):
        return self.status == SUCCESS

    def summary_line(self):
        return 'status={0} iters={1}'.format(self.status, self.iterations_used)


def dumps_record(record, timing=True):
    return json.dumps(record.to_dict(timing), sort_keys=True)


def dumps_history(history, timing=True):
    """JSON lines, one per record, keys sorted.  With ``timing=False`` the text
    is identical across repeated deterministic runs."""
    return ''.join(dumps_record(r, timing) + '\n' for r in history.records)


def append_log(path, record):
    """Appends one record to an iteration log."""
    with open(path, 'a') as f:
        f.write(dumps_record(record) + '\n')


def reasons_text(history, outcome_status=None):
    """Human-readable per-iteration reasons, one section per iteration."""
    lines = ['# Sizing reasons: {0}'.format(history.circuit_type), '']
    if outcome_status is not None:
        lines += ['Outcome: {0} after {1} iteration(s)'.format(outcome_status, len(history)),
                  '']
    for rec in history.records:
        lines.append('## Iteration {0}'.format(rec.index))
        lines.append('')
        if rec.patch.assignments:
            for (key, param), value in rec.patch.assignments.items():
                lines.append('* {0}.{1} = {2:.6g}'.format(key, param, value))
            lines.append('')
        lines.append(rec.rationale)
        lines.append('')
        if rec.failure:
            lines += ['Failure: ' + rec.failure, '']
        verdict = 'pass' if rec.passed else 'fail'
        failing = rec.check.failing + sorted(rec.check.missing)
        if failing:
            verdict += ' (' + ', '.join(failing) + ')'
        lines += ['Verdict: ' + verdict, '']
    return '\n'.join(lines)
