"""Command-line entry point: ``pysizing size|measure|check|bench|vary|targets``.

Exit codes
----------
0  success (targets met, or the command completed)
1  configuration error (bad flags, files, groups, missing API key)
2  targets not met (budget exhausted, or a failing check)
3  simulation failure (measure only)
4  aborted (engine failures or interrupt)

``size`` ends by printing a machine-parseable summary line such as
``status=SUCCESS iters=13``.  Every file is written under the run's work
directory, which also receives a ``run-manifest.json`` listing them.
"""
import os
import sys
import time
import logging
import argparse
from collections import OrderedDict, namedtuple

try:
    import simplejson as json
except ImportError:
    import json

from pysizing import __version__
from pysizing import metrics as m
from pysizing import targets as tg
from pysizing import llm
from pysizing.netlist import NetlistError, read_netlist, serialize_netlist
from pysizing.sim import analysis as an
from pysizing.sim.cache import SimCache
from pysizing.sim.deck import plan_analyses
from pysizing.sim.engine import default_engine
from pysizing.agent.engines import baseline_engine, LLMEngine
from pysizing.agent.history import SUCCESS, BUDGET_EXHAUSTED, ABORTED, reasons_text
from pysizing.agent.loop import run_optimization, evaluate
from pysizing.bench import circuits as bc
from pysizing.bench.campaign import run_campaign
from pysizing.bench.variation import variation_study, SWEEPS
from pysizing.bench import export
from pysizing.pysizing_config import pysizing_conf
from pysizing.utils import PySizingError, ConfigurationError, message, failure, scrub, \
    ensure_dir

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_UNMET = 2
EXIT_SIMULATION = 3
EXIT_ABORTED = 4

STATUS_EXIT = {SUCCESS: EXIT_OK, BUDGET_EXHAUSTED: EXIT_UNMET, ABORTED: EXIT_ABORTED}

BASELINE = 'baseline'
LLM = 'llm'
ENGINES = (BASELINE, LLM)

CAMPAIGN_BUDGET = 20

LOG_FORMAT = '%(levelname)s %(name)s: %(message)s'


class RunConfig(namedtuple('RunConfig', ['netlist', 'group', 'engine', 'seed', 'budget',
                                         'workdir', 'verbosity', 'transcript',
                                         'transcript_mode'])):
    """Resolved options of one sizing run."""
    __slots__ = ()

    def __new__(cls, netlist, group, engine, seed=0, budget=None, workdir=None,
                verbosity='info', transcript=None, transcript_mode=None):
        if engine not in ENGINES:
            raise ConfigurationError("engine must be one of {0}, not {1!r}".format(
                                     ', '.join(ENGINES), engine))
        if budget is not None and int(budget) < 1:
            raise ConfigurationError("the iteration budget must be at least 1")
        if transcript_mode is None:
            transcript_mode = llm.RECORD if transcript else llm.LIVE
        if transcript_mode not in llm.MODES:
            raise ConfigurationError("transcript mode must be one of {0}".format(
                                     ', '.join(llm.MODES)))
        if transcript_mode != llm.LIVE and not transcript:
            raise ConfigurationError("--transcript-mode {0} needs --transcript".format(
                                     transcript_mode))
        return super(RunConfig, cls).__new__(cls, netlist, group, engine, int(seed), budget,
                                             workdir, verbosity, transcript, transcript_mode)

    @classmethod
    def from_args(cls, args, conf):
        return cls(getattr(args, 'netlist', None) or getattr(args, 'circuit', None),
                   getattr(args, 'group', None), args.engine, args.seed, args.budget,
                   conf['workdir'], conf['verbosity'], args.transcript, args.transcript_mode)


class ScrubFilter(logging.Filter):
    """Blanks the values of secret environment variables in log records."""

    def __init__(self, env_names, environ=None):
        super(ScrubFilter, self).__init__()
        self.env_names = list(env_names)
        self.environ = environ

    def filter(self, record):
        record.msg = scrub(record.getMessage(), self.env_names, self.environ)
        record.args = ()
        return True


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors here, not exit status 2."""

    def error(self, msg):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, failure('{0}: error: {1}'.format(self.prog, msg)) + '\n')


def setup_logging(verbosity, conf):
    """Configures the root logger once per process."""
    level = getattr(logging, str(verbosity).upper(), logging.INFO)
    root = logging.getLogger()
    for h in list(root.handlers):
        if getattr(h, '_pysizing', False):
            root.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler.addFilter(ScrubFilter([conf['provider'].get('api_key_env', '')]))
    handler._pysizing = True
    root.addHandler(handler)
    root.setLevel(level)


###
### Shared wiring
###

def _configure(args):
    """Defaults < environment < config file < flags."""
    conf = pysizing_conf.copy()
    conf.load_environ()
    if args.config:
        conf.load(args.config)
    verbosity = None
    if args.verbose:
        verbosity = 'debug'
    elif args.quiet:
        verbosity = 'warning'
    conf.override(engine_path=args.engine_path, sim_timeout=args.timeout,
                  workdir=args.workdir, workers=args.workers, verbosity=verbosity)
    return conf


def _load_manifest(path):
    try:
        with open(path) as f:
            return json.load(f)
    except (IOError, OSError, ValueError) as e:
        raise ConfigurationError("could not read manifest {0!r}: {1}".format(path, e))


def resolve_circuit(args):
    """A benchmark by name, or a user netlist with an optional manifest.

    User netlists default to the G1 group on an open-loop opamp testbench;
    relative includes resolve against the netlist's directory.
    """
    if getattr(args, 'circuit', None):
        circuit = bc.load_benchmark(args.circuit)
    elif getattr(args, 'netlist', None):
        manifest = {'default_group': 'G1',
                    'testbench': {'topology': getattr(args, 'topology', None) or an.OPEN_LOOP}}
        if getattr(args, 'manifest', None):
            manifest.update(_load_manifest(args.manifest))
        try:
            doc = read_netlist(args.netlist)
        except (IOError, OSError) as e:
            raise ConfigurationError("could not read netlist {0!r}: {1}".format(args.netlist, e))
        name = os.path.splitext(os.path.basename(args.netlist))[0]
        include_dir = os.path.dirname(os.path.abspath(args.netlist))
        circuit = bc.BenchCircuit(name, doc, manifest, include_dir).validate()
    else:
        raise ConfigurationError("give --netlist or --circuit")
    return circuit


def resolve_doc(circuit, fixture=None):
    if fixture:
        return circuit.apply_fixture(fixture)
    return circuit.netlist


def resolve_target_group(circuit, name=None, budget=None):
    group = circuit.default_group if name is None else tg.resolve_group(name)
    if budget is not None:
        group = tg.with_budget(group, budget)
    return group


def make_simulator(circuit, conf):
    return default_engine(conf, cache=SimCache(), include_dir=circuit.include_dir)


def make_client(cfg, transcript=None, mode=llm.LIVE, environ=None):
    """A chat client; live ones check for their API key before anything runs."""
    if mode == llm.REPLAY:
        return llm.record_replay(transcript, llm.REPLAY, model_id=cfg.model_id)
    client = llm.ChatClient(cfg, environ=environ)
    client.api_key()
    if transcript:
        return llm.record_replay(transcript, mode, client)
    return client


def make_engine(run, circuit, conf, environ=None, transcript=None):
    """The proposal engine of a run; ``transcript`` overrides the run's path."""
    if run.engine == BASELINE:
        return baseline_engine(run.seed, sensitivities=circuit.sensitivity)
    cfg = llm.ProviderConfig.from_dict(conf['provider'])
    client = make_client(cfg, transcript or run.transcript, run.transcript_mode, environ)
    return LLMEngine(client, name=cfg.model_id)


class RunFiles(object):
    """Tracks what a command writes under its work directory."""

    def __init__(self, workdir, command):
        self.workdir = ensure_dir(os.path.abspath(workdir))
        self.command = command
        self.artifacts = OrderedDict()
        self.t0 = time.time()

    def path(self, name, description):
        self.artifacts[name] = description
        return os.path.join(self.workdir, name)

    def write_text(self, name, text, description):
        with open(self.path(name, description), 'w') as f:
            f.write(text)

    def write_json(self, name, data, description):
        with open(self.path(name, description), 'w') as f:
            json.dump(data, f, indent=2, sort_keys=True)
            f.write('\n')

    def close(self, argv, conf, status=None):
        manifest = {'command': self.command, 'argv': list(argv),
                    'version': __version__, 'status': status,
                    'config_sources': list(conf.sources),
                    'elapsed': time.time() - self.t0,
                    'artifacts': [{'path': k, 'description': v}
                                  for k, v in self.artifacts.items()]}
        path = os.path.join(self.workdir, 'run-manifest.json')
        with open(path, 'w') as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write('\n')
        return path


def _report_table(report, group=None, check=None):
    lines = []
    for kind in report.kinds():
        value = m.format_metric(kind, report.get(kind))
        line = '{0:<22} {1:>14}'.format(m.LABELS[kind], value)
        if check is not None and kind in check.per_metric:
            c = check.per_metric[kind]
            line += '  {0}  (accepted {1} {2})'.format(
                'pass' if c.passed else 'FAIL',
                '>=' if group[kind].direction == tg.AT_LEAST else '<=',
                m.format_metric(kind, c.relaxed_bound))
        lines.append(line)
    for kind, why in report.absent.items():
        lines.append('{0:<22} {1:>14}  ({2})'.format(m.LABELS[kind], 'absent',
                                                     why.splitlines()[0]))
    if check is not None and check.missing:
        lines.append('missing: ' + ', '.join(m.SHORT_NAMES[k] for k in sorted(check.missing)))
    return '\n'.join(lines)


###
### Commands
###

def cmd_size(args, conf, argv=()):
    """Sizes a netlist; writes the final netlist, log, reasons and report."""
    run = RunConfig.from_args(args, conf)
    circuit = resolve_circuit(args)
    group = resolve_target_group(circuit, args.group, run.budget)
    files = RunFiles(run.workdir, 'size')
    transcript = None
    if run.transcript:
        transcript = os.path.abspath(run.transcript)
        if run.transcript_mode == llm.RECORD:
            files.artifacts[os.path.relpath(transcript, files.workdir)] = 'chat transcript'
    engine = make_engine(run, circuit, conf, transcript=transcript)
    log_path = files.path('iterations.jsonl', 'one JSON record per iteration')
    if os.path.exists(log_path):
        os.remove(log_path)
    outcome = run_optimization(resolve_doc(circuit, args.fixture), group, engine,
                               make_simulator(circuit, conf), tunables=circuit.tunables,
                               tb_base=circuit.testbench(group),
                               circuit_type=circuit.circuit_type,
                               workdir=os.path.join(files.workdir, 'sim'), log_path=log_path,
                               supply_source=circuit.supply_source,
                               tran=circuit.tran_spec(), conf=conf)
    files.write_text('final.sp', serialize_netlist(outcome.final_netlist),
                     'best design point as a SPICE netlist')
    files.write_text('reasons.md', reasons_text(outcome.history, outcome.status),
                     'reasons for each parameter adjustment')
    best = outcome.history.best()
    files.write_json('report.json', {
        'status': outcome.status, 'iterations': outcome.iterations_used,
        'group': tg.group_to_dict(group), 'best_iteration': best.index if best else None,
        'report': best.report.to_dict() if best and best.report else None,
        'check': best.check.to_dict() if best else None}, 'metric report of the best design')
    export.export_trace(outcome, files.path('trace.csv', 'metric series per iteration'))
    if args.plot:
        if export.plot_trace(outcome, os.path.join(files.workdir, 'trace.svg')):
            files.artifacts['trace.svg'] = 'metric series plot'
    files.close(argv, conf, outcome.status)
    if best is not None and best.report is not None:
        print(_report_table(best.report, group, best.check))
    line = outcome.summary_line()
    print(message(line) if outcome.success else failure(line), file=sys.stderr)
    print(line)
    return STATUS_EXIT[outcome.status]


def measurement_group(base, kinds):
    """``base`` restricted to (or extended with placeholder targets for) kinds."""
    targets = []
    for kind in kinds:
        if kind in base.kinds:
            targets.append(base[kind])
        else:
            targets.append(tg.TargetSpec(kind, tg.AT_LEAST, 0.0))
    return tg.TargetGroup(base.name, targets, base.load, base.max_iterations, base.supply_v,
                          base.vcm)


def cmd_measure(args, conf, argv=()):
    """Runs the analysis plan once and prints the report."""
    circuit = resolve_circuit(args)
    group = resolve_target_group(circuit, args.group)
    annotate = args.group is not None and not args.metrics
    if args.metrics:
        try:
            kinds = [m.kind_from_name(s) for s in args.metrics.split(',') if s.strip()]
        except ValueError as e:
            raise ConfigurationError(str(e))
        group = measurement_group(group, kinds)
    tb_base = circuit.testbench(group)
    plan = plan_analyses(group.kinds, tb_base, conf, circuit.tran_spec())
    files = RunFiles(conf['workdir'], 'measure')
    report, fail = evaluate(resolve_doc(circuit, args.fixture), plan, group,
                            make_simulator(circuit, conf), tb_base.family,
                            circuit.supply_source, 'measure',
                            os.path.join(files.workdir, 'sim'), conf)
    check = tg.check_all(report, group)
    files.write_json('report.json', {'report': report.to_dict(),
                                     'check': check.to_dict() if annotate else None,
                                     'analyses': [[s.kind, t.topology] for s, t in plan]},
                     'measured metric report')
    print(_report_table(report, group, check if annotate else None))
    if fail is not None:
        files.close(argv, conf, 'SIMULATION_FAILURE')
        print(failure('simulation failed: ' + fail), file=sys.stderr)
        return EXIT_SIMULATION
    files.close(argv, conf, 'MEASURED')
    return EXIT_OK


def cmd_check(args, conf, argv=()):
    """Judges a report file against a group."""
    try:
        with open(args.report) as f:
            data = json.load(f)
    except (IOError, OSError, ValueError) as e:
        raise ConfigurationError("could not read report {0!r}: {1}".format(args.report, e))
    if 'report' in data and isinstance(data['report'], dict):
        data = data['report']
    try:
        report = m.report_from_dict(data, display_units=args.display_units)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigurationError("bad report {0!r}: {1}".format(args.report, e))
    group = tg.resolve_group(args.group)
    check = tg.check_all(report, group)
    print(_report_table(report, group, check))
    for kind, c in check.per_metric.items():
        logger.debug("%s margin %g", kind, c.margin)
    if check.overall_pass:
        print(message('overall: pass'))
        return EXIT_OK
    print(failure('overall: fail'))
    return EXIT_UNMET


def cmd_bench(args, conf, argv=()):
    """Runs a multi-attempt campaign on a shipped circuit."""
    if args.attempts < 1:
        raise ConfigurationError("--attempts must be at least 1")
    run = RunConfig.from_args(args, conf)
    circuit = bc.load_benchmark(args.circuit)
    group = resolve_target_group(circuit, args.group,
                                 CAMPAIGN_BUDGET if run.budget is None else run.budget)
    files = RunFiles(run.workdir, 'bench')
    simulator = make_simulator(circuit, conf)
    if run.engine == BASELINE:
        engine = lambda i: baseline_engine(run.seed + i, sensitivities=circuit.sensitivity)
    else:
        if run.transcript_mode != llm.REPLAY:
            llm.ChatClient(llm.ProviderConfig.from_dict(conf['provider'])).api_key()

        def engine(i):
            path = None
            if run.transcript:
                stem, ext = os.path.splitext(os.path.abspath(run.transcript))
                path = '{0}-{1:02d}{2}'.format(stem, i, ext or '.jsonl')
            return make_engine(run, circuit, conf, transcript=path)

    summary = run_campaign(circuit, group, engine, args.attempts, simulator,
                           workdir=files.workdir, conf=conf)
    for a in summary.attempts:
        files.artifacts['attempt-{0:02d}/iterations.jsonl'.format(a.attempt_index)] = \
            'iteration log of attempt {0}'.format(a.attempt_index)
    name = 'campaign' + export.EXTENSIONS[args.format]
    export.export_results(summary, args.format, files.path(name, 'one row per attempt'))
    files.write_json('summary.json', summary.to_dict(), 'campaign statistics')
    files.close(argv, conf, 'DONE')
    print('{0}: success rate {1:.0%} over {2} attempt(s), mean iterations {3}'.format(
          summary.circuit, summary.success_rate, len(summary),
          'n/a' if summary.iteration_mean is None else
          '{0:.1f} (range {1}-{2})'.format(summary.iteration_mean, summary.iteration_min,
                                           summary.iteration_max)))
    return EXIT_OK


def cmd_vary(args, conf, argv=()):
    """Random-variation study of a sized netlist."""
    circuit = resolve_circuit(args)
    group = resolve_target_group(circuit, args.group)
    sweeps = SWEEPS if not args.sweeps else tuple(s.strip() for s in args.sweeps.split(','))
    unknown = set(sweeps) - set(SWEEPS)
    if unknown:
        raise ConfigurationError("unknown sweeps {0}; have {1}".format(
                                 ', '.join(sorted(unknown)), ', '.join(SWEEPS)))
    try:
        study = variation_study(resolve_doc(circuit, args.fixture), circuit.tunables, group,
                                args.sigma_bias, args.sigma_size, args.n, args.seed,
                                make_simulator(circuit, conf), sweeps=sweeps, conf=conf)
    except ValueError as e:
        raise ConfigurationError(str(e))
    files = RunFiles(conf['workdir'], 'vary')
    name = 'variation' + export.EXTENSIONS[args.format]
    for path in export.export_results(study, args.format,
                                      files.path(name, 'curves of every sample')):
        files.artifacts.setdefault(os.path.basename(path), 'per-x envelope')
    if args.plot and export.plot_study(study, os.path.join(files.workdir, 'variation.svg')):
        files.artifacts['variation.svg'] = 'curve plot'
    files.close(argv, conf, 'DONE')
    print('{0} samples, {1} failed sweep(s)'.format(study.n_samples, len(study.failures)))
    return EXIT_OK


def cmd_targets(args, conf, argv=()):
    """Prints the builtin groups, or writes one as a target file."""
    groups = tg.builtin_groups()
    if args.dump:
        group = tg.get_group(args.dump)
        json.dump(tg.group_to_dict(group), sys.stdout, indent=2)
        sys.stdout.write('\n')
        return EXIT_OK
    for group in groups.values():
        print('{0}: load {1}, budget {2}'.format(group.name, group.load, group.max_iterations))
        for spec in group.targets:
            print('    ' + spec.describe())
    return EXIT_OK


COMMANDS = OrderedDict([('size', cmd_size), ('measure', cmd_measure), ('check', cmd_check),
                        ('bench', cmd_bench), ('vary', cmd_vary), ('targets', cmd_targets)])


###
### Argument parsing
###

def _add_circuit(p, with_topology=True):
    src = p.add_mutually_exclusive_group()
    src.add_argument('--netlist', help='path to a SPICE netlist.')
    src.add_argument('--circuit', help='a shipped benchmark: ' + ', '.join(bc.BENCHMARKS))
    p.add_argument('--manifest', help='JSON manifest (policy, testbench, sensitivity) for '
                                      '--netlist.')
    p.add_argument('--fixture', help='named parameter set from the manifest, eg G1-5.')
    p.add_argument('--group', help='builtin group (G1, G2, G3) or target file.')
    if with_topology:
        p.add_argument('--topology', choices=an.TOPOLOGIES, default=None,
                       help='testbench topology for --netlist (default OPEN_LOOP).')


def _add_engine(p):
    p.add_argument('--engine', choices=ENGINES, default=BASELINE,
                   help='proposal engine.')
    p.add_argument('--seed', type=int, default=0, help='baseline engine seed.')
    p.add_argument('--budget', type=int, default=None, help='iteration budget override.')
    p.add_argument('--transcript', help='chat transcript file (llm engine).')
    p.add_argument('--transcript-mode', dest='transcript_mode', choices=llm.MODES,
                   default=None, help='record (default with --transcript), replay or live.')


def make_parser():
    parser = _Parser(prog='pysizing', description='Analog circuit sizing in the loop.')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    parser.add_argument('--config', help='JSON config file.')
    parser.add_argument('--engine-path', dest='engine_path', help='SPICE engine binary.')
    parser.add_argument('--timeout', type=float, default=None,
                        help='simulation timeout [s].')
    parser.add_argument('--workdir', help='where every output is written.')
    parser.add_argument('--workers', type=int, default=None, help='concurrent simulations.')
    verb = parser.add_mutually_exclusive_group()
    verb.add_argument('-v', '--verbose', action='store_true', help='debug logging.')
    verb.add_argument('-q', '--quiet', action='store_true', help='warnings and errors only.')
    sub = parser.add_subparsers(dest='command', metavar='command', parser_class=_Parser)
    sub.required = True

    p = sub.add_parser('size', help='size a netlist against a target group.')
    _add_circuit(p)
    _add_engine(p)
    p.add_argument('--plot', action='store_true', help='also write trace.svg.')

    p = sub.add_parser('measure', help='simulate and measure without sizing.')
    _add_circuit(p)
    p.add_argument('--metrics', help='comma-separated metrics instead of a whole group.')

    p = sub.add_parser('check', help='judge a report file against a group.')
    p.add_argument('--report', required=True, help='report JSON file.')
    p.add_argument('--group', required=True, help='builtin group or target file.')
    p.add_argument('--display-units', dest='display_units', action='store_true',
                   help='report values are in display units (MHz, mW, mV).')

    p = sub.add_parser('bench', help='multi-attempt campaign on a shipped circuit.')
    p.add_argument('--circuit', required=True, help=', '.join(bc.BENCHMARKS))
    p.add_argument('--group', help='builtin group or target file.')
    p.add_argument('--attempts', type=int, default=10)
    p.add_argument('--format', choices=export.FORMATS, default=export.CSV)
    _add_engine(p)

    p = sub.add_parser('vary', help='random-variation study.')
    _add_circuit(p, with_topology=False)
    p.add_argument('--sigma-bias', dest='sigma_bias', type=float, default=0.1,
                   help='absolute bias deviation [V].')
    p.add_argument('--sigma-size', dest='sigma_size', type=float, default=0.01,
                   help='relative size deviation.')
    p.add_argument('--n', type=int, default=20, help='number of samples.')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--sweeps', help='comma-separated subset of ' + ', '.join(SWEEPS))
    p.add_argument('--format', choices=export.FORMATS, default=export.CSV)
    p.add_argument('--plot', action='store_true', help='also write variation.svg.')

    p = sub.add_parser('targets', help='list the builtin target groups.')
    p.add_argument('--dump', help='print one group as a target file.')
    return parser


def main(argv=None):
    """Entry point for the pysizing utility."""
    argv = sys.argv[1:] if argv is None else list(argv)
    args = make_parser().parse_args(argv)
    try:
        conf = _configure(args)
        setup_logging(conf['verbosity'], conf)
        return COMMANDS[args.command](args, conf, argv)
    except llm.AuthError as e:
        print(failure('authentication: {0}'.format(e)), file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigurationError, NetlistError) as e:
        print(failure(str(e)), file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print(failure('interrupted'), file=sys.stderr)
        return EXIT_ABORTED
    except PySizingError as e:
        logger.error("%s", e)
        print(failure(str(e)), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
