"""Simulation engine interfaces.

A :class:`SimEngine` knows whether it is available on the user's system and
how to turn a deck into raw output.  :class:`NgspiceEngine` runs ngspice in
batch mode as a subprocess in a private working directory; any engine that
writes ASCII raw files may be substituted by subclassing.

The following methods must be overridden in SimEngine subclasses:

.. code-block:: python

    @property
    def exists(self):
        # Is this engine available on the user's system?
        return (True or False)

    def execute(self, deck, workdir, timeout):
        # Runs one deck; returns (raw text, engine log).
        ...

Test doubles may instead override :meth:`SimEngine.simulate` and skip decks
altogether.
"""
import os
import re
import time
import shutil
import hashlib
import logging
import tempfile
import subprocess
from collections import namedtuple

from pysizing.sim import deck as deckmod
from pysizing.sim.errors import SimulationError, ConvergenceFailure, Timeout, \
    EngineCrash, EngineNotFound, ParseFailure
from pysizing.sim.rawfile import parse_plots
from pysizing.pysizing_config import pysizing_conf
from pysizing.utils import ensure_dir

logger = logging.getLogger(__name__)

_abort_pattern = re.compile(
    r"simulation\(s\) aborted|timestep too small|no convergence|iteration limit reached",
    re.IGNORECASE)
_convergence_pattern = re.compile(
    r"singular matrix|gmin stepping failed|source stepping failed", re.IGNORECASE)
_fatal_pattern = re.compile(r"^\s*(?:error|fatal)\b.*$", re.IGNORECASE | re.MULTILINE)


class SimResult(namedtuple('SimResult', ['analysis', 'testbench', 'waveforms', 'op_point',
                                         'wallclock', 'engine_log'])):
    """Output of one simulation.  ``waveforms`` maps canonical signal names to
    :class:`~pysizing.sim.rawfile.Waveform`; single-point runs fill
    ``op_point`` instead."""
    __slots__ = ()

    @property
    def key(self):
        return (self.analysis.kind, self.testbench.topology if self.testbench else None)

    def waveform(self, name):
        try:
            return self.waveforms[name]
        except KeyError:
            kind = self.analysis.kind if self.analysis is not None else 'unlabelled'
            raise KeyError("no signal {0!r} in {1} result; have {2}".format(
                           name, kind, sorted(self.waveforms)))

    def with_context(self, analysis, testbench):
        return self._replace(analysis=analysis, testbench=testbench)


Limits = namedtuple('Limits', ['timeout', 'workdir'])


def digest(deck):
    return hashlib.sha1(deck.encode('utf-8')).hexdigest()


def result_from_raw(raw, log='', wallclock=0.0, analysis=None, testbench=None):
    """Wraps parsed raw output in a SimResult."""
    plots = parse_plots(raw)
    plot = plots[-1]
    if plot.plotname.lower().startswith('constant'):
        raise ParseFailure("raw output holds no analysis plot", 0, log)
    if plot.npoints == 1:
        waveforms, op_point = {}, plot.op_point()
    else:
        waveforms, op_point = plot.waveforms(), {}
    if not waveforms and not op_point:
        raise ParseFailure("raw output holds no signals", 0, log)
    return SimResult(analysis, testbench, waveforms, op_point, wallclock, log)


class SimEngine(object):
    """Base simulation engine.

    Parameters
    ----------
    timeout : float, optional
        Wallclock limit per run [s]; the configured ``sim_timeout`` when absent.
    include_dir : str, optional
        Directory that relative .include paths in device netlists resolve
        against.
    cache : SimCache, optional
        Results memoized by deck digest.

    """
    name = 'abstract'

    def __init__(self, timeout=None, include_dir=None, cache=None):
        self._exists = None
        self.timeout = pysizing_conf['sim_timeout'] if timeout is None else timeout
        self.include_dir = include_dir
        self.cache = cache

    @property
    def exists(self):
        raise NotImplementedError

    def execute(self, deck, workdir, timeout):
        raise NotImplementedError

    def run(self, deck, workdir=None, timeout=None):
        """Runs a deck and parses its output.

        Returns
        -------
        result : SimResult
            With ``analysis`` and ``testbench`` unset.

        Raises
        ------
        SimulationError
            One of its subclasses, never anything else.

        """
        timeout = self.timeout if timeout is None else timeout
        own = workdir is None
        workdir = tempfile.mkdtemp(prefix='pysizing-') if own else ensure_dir(workdir)
        t0 = time.time()
        try:
            raw, log = self.execute(deck, workdir, timeout)
            wallclock = time.time() - t0
            return result_from_raw(raw, log, wallclock)
        except ParseFailure as e:
            logger.warning("could not parse %s output: %s", self.name, e)
            raise
        finally:
            if own:
                shutil.rmtree(workdir, ignore_errors=True)

    def simulate(self, doc, analysis, tb, workdir=None):
        """Builds, runs (or recalls) and labels one simulation."""
        deck = deckmod.build_deck(doc, analysis, tb, self.include_dir)
        key = digest(deck)
        if self.cache is not None and key in self.cache:
            logger.debug("cache hit for %s %s", analysis.kind, tb.topology)
            return self.cache[key].with_context(analysis, tb)
        logger.info("simulating %s on %s", analysis.kind, tb.topology)
        result = self.run(deck, workdir).with_context(analysis, tb)
        if self.cache is not None:
            self.cache[key] = result
        return result


class NgspiceEngine(SimEngine):
    """ngspice in batch mode (``ngspice -b deck.cir``)."""
    name = 'ngspice'

    def __init__(self, path=None, **kwargs):
        self.path = pysizing_conf['engine_path'] if path is None else path
        super(NgspiceEngine, self).__init__(**kwargs)

    @property
    def exists(self):
        if self._exists is None:
            self._exists = shutil.which(self.path) is not None
        return self._exists

    def execute(self, deck, workdir, timeout):
        if not self.exists:
            raise EngineNotFound("simulation engine {0!r} not found on the path".format(
                                 self.path))
        deck_path = os.path.join(workdir, deckmod.DECK_NAME)
        raw_path = os.path.join(workdir, deckmod.RAW_NAME)
        if os.path.exists(raw_path):
            os.remove(raw_path)
        with open(deck_path, 'w') as f:
            f.write(deck)
        try:
            proc = subprocess.run([self.path, '-b', deckmod.DECK_NAME], cwd=workdir,
                                  capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired as e:
            log = (e.stdout or '') if isinstance(e.stdout, str) else ''
            raise Timeout("simulation exceeded {0:g} s".format(timeout), log)
        except OSError as e:
            raise EngineNotFound("could not start {0!r}: {1}".format(self.path, e))
        log = proc.stdout + proc.stderr
        with open(os.path.join(workdir, 'engine.log'), 'w') as f:
            f.write(log)
        if _abort_pattern.search(log) or (_convergence_pattern.search(log) and
                                          not os.path.isfile(raw_path)):
            raise ConvergenceFailure("engine reported no convergence", log)
        if not os.path.isfile(raw_path):
            fatal = _fatal_pattern.search(log)
            msg = fatal.group(0).strip() if fatal else \
                "exit status {0} without results".format(proc.returncode)
            raise EngineCrash(msg, log)
        with open(raw_path) as f:
            raw = f.read()
        return raw, log


def run_simulation(deck, limits=None, engine=None):
    """Runs a deck in batch mode and returns its parsed output.

    Parameters
    ----------
    deck : str
        Complete deck text (see :func:`pysizing.sim.deck.build_deck`).
    limits : Limits, optional
        Timeout [s] and working directory; a temporary directory and the
        configured timeout when absent.
    engine : SimEngine, optional
        Defaults to ngspice at the configured path.

    Returns
    -------
    result : SimResult

    Raises
    ------
    SimulationError
        ConvergenceFailure, Timeout, EngineCrash, EngineNotFound or
        ParseFailure.

    """
    engine = NgspiceEngine() if engine is None else engine
    timeout, workdir = (None, None) if limits is None else limits
    return engine.run(deck, workdir, timeout)


def default_engine(conf=None, cache=None, include_dir=None):
    """An NgspiceEngine set up from configuration."""
    conf = pysizing_conf if conf is None else conf
    return NgspiceEngine(conf['engine_path'], timeout=conf['sim_timeout'],
                         include_dir=include_dir, cache=cache)


__all__ = ['SimResult', 'Limits', 'SimEngine', 'NgspiceEngine', 'run_simulation',
           'default_engine', 'result_from_raw', 'digest', 'SimulationError']
