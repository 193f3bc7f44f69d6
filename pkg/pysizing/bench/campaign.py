"""Multi-attempt sizing campaigns over a benchmark circuit."""
import os
import logging
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from pysizing.agent.engines import ProposalEngine
from pysizing.agent.loop import run_optimization
from pysizing.agent.history import SUCCESS
from pysizing.bench.circuits import BenchCircuit, load_benchmark
from pysizing.pysizing_config import pysizing_conf
from pysizing.utils import ensure_dir

logger = logging.getLogger(__name__)


class AttemptResult(namedtuple('AttemptResult', ['attempt_index', 'outcome', 'iterations',
                                                 'success'])):
    __slots__ = ()

    @classmethod
    def from_outcome(cls, index, outcome):
        return cls(index, outcome, outcome.iterations_used, outcome.status == SUCCESS)


class CampaignSummary(object):
    """Aggregate of independent attempts on one circuit.

    Iteration statistics cover successful attempts only; they are None when
    nothing succeeded.
    """

    def __init__(self, circuit, engine_name, group, attempts):
        self.circuit = circuit
        self.engine_name = engine_name
        self.group = group
        self.attempts = sorted(attempts, key=lambda a: a.attempt_index)

    def __len__(self):
        return len(self.attempts)

    @property
    def successes(self):
        return [a for a in self.attempts if a.success]

    @property
    def n_failures(self):
        return len(self.attempts) - len(self.successes)

    @property
    def success_rate(self):
        if not self.attempts:
            return 0.0
        return len(self.successes) / float(len(self.attempts))

    def _iters(self):
        return np.array([a.iterations for a in self.successes], dtype=float)

    @property
    def iteration_mean(self):
        it = self._iters()
        return float(np.mean(it)) if it.size else None

    @property
    def iteration_min(self):
        it = self._iters()
        return int(np.min(it)) if it.size else None

    @property
    def iteration_max(self):
        it = self._iters()
        return int(np.max(it)) if it.size else None

    def to_dict(self):
        return {'circuit': self.circuit,
                'engine': self.engine_name,
                'group': self.group.name,
                'attempts': len(self.attempts),
                'success_rate': self.success_rate,
                'failures': self.n_failures,
                'iteration_mean': self.iteration_mean,
                'iteration_min': self.iteration_min,
                'iteration_max': self.iteration_max}

    def __repr__(self):
        return ("CampaignSummary({0}, {1}: {2:.0%} of {3}, mean {4} iterations)").format(
            self.circuit, self.engine_name, self.success_rate, len(self.attempts),
            self.iteration_mean)


def _engine_for(engine, index):
    if isinstance(engine, ProposalEngine):
        return engine
    return engine(index)


def run_attempt(circuit, group, engine, index, simulator=None, workdir=None, conf=None):
    """One independent sizing run with a fresh history."""
    attempt_dir = None
    log_path = None
    if workdir is not None:
        attempt_dir = ensure_dir(os.path.join(workdir, 'attempt-{0:02d}'.format(index)))
        log_path = os.path.join(attempt_dir, 'iterations.jsonl')
        if os.path.exists(log_path):
            os.remove(log_path)
    outcome = run_optimization(circuit.netlist, group, _engine_for(engine, index), simulator,
                               tunables=circuit.tunables, policy=circuit.policy,
                               tb_base=circuit.testbench(group),
                               circuit_type=circuit.circuit_type, workdir=attempt_dir,
                               log_path=log_path, supply_source=circuit.supply_source,
                               tran=circuit.tran_spec(), conf=conf)
    logger.info("%s attempt %d: %s", circuit.name, index, outcome.summary_line())
    return AttemptResult.from_outcome(index, outcome)


def run_campaign(circuit, group, engine, attempts, simulator=None, workers=None,
                 workdir=None, conf=None):
    """Runs independent attempts and aggregates them.

    Parameters
    ----------
    circuit : BenchCircuit or str
    group : TargetGroup or None
        The circuit's default group when None.
    engine : ProposalEngine or callable
        A shared engine, or ``engine(attempt_index)`` returning a fresh one
        (eg a baseline engine seeded per attempt).
    attempts : int
    simulator : SimEngine, optional
    workers : int, optional
        Concurrent attempts; the configured ``workers`` by default.
    workdir : str, optional
        Each attempt gets its own ``attempt-NN`` subdirectory.
    conf : PySizingConfig, optional

    Returns
    -------
    summary : CampaignSummary

    """
    conf = pysizing_conf if conf is None else conf
    if int(attempts) < 1:
        raise ValueError("a campaign needs at least one attempt")
    if not isinstance(circuit, BenchCircuit):
        circuit = load_benchmark(circuit)
    group = circuit.default_group if group is None else group
    workers = conf['workers'] if workers is None else workers
    indices = list(range(1, int(attempts) + 1))

    def attempt(i):
        return run_attempt(circuit, group, engine, i, simulator, workdir, conf)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(attempt, indices))
    else:
        results = [attempt(i) for i in indices]
    name = _engine_for(engine, 1).name
    summary = CampaignSummary(circuit.name, name, group, results)
    logger.info("%r", summary)
    return summary
