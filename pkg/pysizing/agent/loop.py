"""The sizing loop: propose, apply, simulate, measure, compare.

Iteration 1 simulates the user's netlist unchanged; from iteration 2 on the
engine proposes a patch from the full context history.  Simulation and
measurement failures are observations recorded in the iteration, never reasons
to stop.  The loop ends at the first design that meets every target, when the
group's iteration budget is spent, or after too many consecutive engine
failures.
"""
import time
import logging
from collections import namedtuple

from pysizing import metrics
from pysizing import targets as tg
from pysizing.netlist import ParamPatch, NetlistError, extract_tunables, apply_patch, \
    current_values, supply_sources, validate_constraints, policy_biases
from pysizing.sim import analysis as an
from pysizing.sim.deck import plan_analyses
from pysizing.sim.errors import SimulationError
from pysizing.sim.engine import default_engine
from pysizing.utils import ConfigurationError, ensure_dir
from pysizing.pysizing_config import pysizing_conf
from pysizing.agent.history import IterationRecord, ContextHistory, OptimizationOutcome, \
    SUCCESS, BUDGET_EXHAUSTED, ABORTED, append_log
from pysizing.agent.prompt import build_prompt
from pysizing.agent.engines import EngineFailure, propose

logger = logging.getLogger(__name__)

BASELINE_RATIONALE = 'Baseline evaluation of the unmodified netlist.'

Task = namedtuple('Task', ['index', 'name', 'description', 'inputs', 'outputs', 'resolved'])


def default_testbench(group, topology=an.OPEN_LOOP):
    return an.TestbenchConfig(topology, group.vcm, group.load, None, group.supply_v)


def decompose_tasks(baseline, group, tb_base=None, conf=None, tran=None):
    """The four fixed stages every run goes through.

    Returns
    -------
    tasks : list of Task
        Analysis planning (resolved to the simulation plan), sizing-prompt
        generation, simulation and measurement, comparison and reporting.

    Raises
    ------
    ConfigurationError
        If the group has no targets.

    """
    if not group.targets:
        raise ConfigurationError("target group {0!r} is empty".format(group.name))
    tb_base = default_testbench(group) if tb_base is None else tb_base
    plan = plan_analyses(group.kinds, tb_base, conf, tran)
    return [
        Task(1, 'analysis planning',
             'choose the simulations that cover the targeted metrics',
             ('target group', 'testbench'), ('analysis plan',), plan),
        Task(2, 'sizing prompt generation',
             'render constraints, context history and targets for the engine',
             ('context history', 'tunables'), ('prompt',), None),
        Task(3, 'simulation and measurement',
             'apply the patch, run the plan and measure the metrics',
             ('patch', 'netlist', 'analysis plan'), ('metric report',), None),
        Task(4, 'comparison and reporting',
             'check the report against the relaxed targets and record the iteration',
             ('metric report', 'target group'), ('check result', 'iteration record'), None),
        ]


def evaluate(doc, plan, group, simulator, family, supply_source='vdd', design_point_id=None,
             workdir=None, conf=None):
    """Runs a plan on a document and measures the group's metrics.

    Returns
    -------
    report : MetricReport
    failure : str or None
        The simulation failures, joined, if any.

    """
    results, failed = [], {}
    for spec, tb in plan:
        try:
            results.append(simulator.simulate(doc, spec, tb, workdir=workdir))
        except SimulationError as e:
            logger.warning("iteration %s: %s %s failed: %s", design_point_id, spec.kind,
                           tb.topology, e)
            failed[(spec.kind, tb.topology)] = e.describe()
    report = metrics.assemble_report(results, group, family, supply_source, design_point_id,
                                     failed, conf)
    failure = '; '.join('{0} {1}: {2}'.format(k, t, msg)
                        for (k, t), msg in sorted(failed.items())) or None
    return report, failure


def design_netlist(baseline, tunables, design):
    """The baseline with a recorded design's tunable values applied."""
    return apply_patch(baseline, ParamPatch(design), baseline, tunables)


def run_optimization(baseline, group, engine, simulator=None, tunables=None, policy=None,
                     tb_base=None, circuit_type=None, workdir=None, log_path=None,
                     max_engine_failures=None, supply_source=None, tran=None, conf=None):
    """Sizes a netlist until it meets a target group or the budget runs out.

    Parameters
    ----------
    baseline : NetlistDoc
        The user's netlist; its supplies and models are never changed.
    group : TargetGroup
        Targets, load and iteration budget.
    engine : ProposalEngine
    simulator : SimEngine, optional
        ngspice from configuration by default.
    tunables : list of TunableParam, optional
        Extracted from ``policy`` when absent.
    policy : dict, optional
        Grouping policy for :func:`pysizing.netlist.extract_tunables`.
    tb_base : TestbenchConfig, optional
        Open-loop opamp testbench from the group when absent.
    circuit_type : str, optional
        Label used in prompts; the netlist title by default.
    workdir : str, optional
        Where simulations run.
    log_path : str, optional
        Iteration log, appended one JSON line per iteration.
    max_engine_failures : int, optional
        Consecutive engine failures tolerated before aborting.
    supply_source : str, optional
        Voltage source whose current gives the power.
    tran : AnalysisSpec, optional
        Transient override for the plan.
    conf : PySizingConfig, optional

    Returns
    -------
    outcome : OptimizationOutcome

    Raises
    ------
    ConfigurationError
        If the baseline violates its own constraints or nothing is tunable.

    """
    conf = pysizing_conf if conf is None else conf
    biases = [n for _, n in policy_biases(policy)]
    if validate_constraints(baseline, baseline, biases=biases):
        raise ConfigurationError("baseline netlist fails its own constraint check")
    if tunables is None:
        tunables = extract_tunables(baseline, policy)
    if not tunables:
        raise ConfigurationError("netlist {0!r} has no tunable parameters".format(
                                 baseline.title))
    tb_base = default_testbench(group) if tb_base is None else tb_base
    simulator = default_engine(conf) if simulator is None else simulator
    if max_engine_failures is None:
        max_engine_failures = conf['max_engine_failures']
    if supply_source is None:
        supplies = supply_sources(baseline, exclude=biases)
        supply_source = supplies[0].lower() if supplies else 'vdd'
    if workdir is not None:
        ensure_dir(workdir)
    tasks = decompose_tasks(baseline, group, tb_base, conf, tran)
    plan = tasks[0].resolved
    family = tb_base.family
    history = ContextHistory(circuit_type or baseline.title or 'circuit', baseline, group,
                             tunables, tb_base)
    logger.info("sizing %s against %s: %d tunables, %d analyses, budget %d",
                history.circuit_type, group.name, len(tunables), len(plan),
                group.max_iterations)

    doc = baseline
    status = BUDGET_EXHAUSTED
    engine_failures = 0
    try:
        for index in range(1, group.max_iterations + 1):
            t0 = time.time()
            failure = None
            if index == 1:
                patch = ParamPatch({}, BASELINE_RATIONALE)
                new_doc = doc
            else:
                bundle = build_prompt(history)
                try:
                    patch = propose(engine, bundle, tunables, history)
                except EngineFailure as e:
                    engine_failures += 1
                    logger.warning("iteration %d: engine failure %d/%d: %s", index,
                                   engine_failures, max_engine_failures, e)
                    record = IterationRecord(index, ParamPatch({}, ''), history.last.design,
                                             None, 'engine failure: {0}'.format(e),
                                             tg.check_all(None, group),
                                             'Engine failure: {0}'.format(e), time.time() - t0)
                    _commit(history, record, log_path)
                    if engine_failures >= max_engine_failures:
                        logger.error("aborting after %d consecutive engine failures",
                                     engine_failures)
                        status = ABORTED
                        break
                    continue
                engine_failures = 0
                try:
                    new_doc = apply_patch(doc, patch, baseline, tunables)
                except NetlistError as e:
                    failure = 'patch rejected: {0}'.format(e)
                    new_doc = doc
            if failure is None:
                report, failure = evaluate(new_doc, plan, group, simulator, family,
                                           supply_source, index, workdir, conf)
                doc = new_doc
            else:
                report = None
            design = current_values(doc, tunables)
            check = tg.check_all(report, group)
            record = IterationRecord(index, patch, design, report, failure, check,
                                     patch.rationale, time.time() - t0)
            _commit(history, record, log_path)
            if check.overall_pass:
                status = SUCCESS
                break
    except KeyboardInterrupt:
        logger.error("interrupted after %d iteration(s)", len(history))
        status = ABORTED

    best = history.best()
    final = baseline if best is None else design_netlist(baseline, tunables, best.design)
    outcome = OptimizationOutcome(status, final, history, len(history))
    logger.info("%s", outcome.summary_line())
    return outcome


def _commit(history, record, log_path):
    history.append(record)
    verdict = 'pass' if record.passed else 'fail ({0})'.format(
        ', '.join(metrics.SHORT_NAMES[k] for k in record.check.failing +
                  sorted(record.check.missing)))
    logger.info("iteration %d: %s", record.index, verdict)
    if log_path is not None:
        append_log(log_path, record)
