"""Simulation failure modes.  Each one carries an excerpt of the engine log so
that the optimization loop can record it as an observable."""
from pysizing.utils import PySizingError

LOG_EXCERPT_LINES = 20


def log_excerpt(log, nlines=LOG_EXCERPT_LINES):
    """The last few non-blank lines of an engine log."""
    if not log:
        return ''
    lines = [l for l in log.splitlines() if l.strip()]
    return '\n'.join(lines[-nlines:])


class SimulationError(PySizingError):
    """Base class for simulation failures."""

    def __init__(self, msg, log=''):
        super(SimulationError, self).__init__(msg)
        self.log_excerpt = log_excerpt(log)

    @property
    def kind(self):
        return self.__class__.__name__

    def describe(self):
        """One-paragraph description used in iteration records and prompts."""
        s = "{0}: {1}".format(self.kind, self.args[0] if self.args else '')
        if self.log_excerpt:
            s += "\n" + self.log_excerpt
        return s


class ConvergenceFailure(SimulationError):
    """The engine reported that it could not converge."""


class Timeout(SimulationError):
    """The engine ran longer than the configured limit."""


class EngineCrash(SimulationError):
    """The engine exited without producing results."""


class EngineNotFound(SimulationError):
    """The engine binary is not on the execution path."""


class MissingPort(SimulationError):
    """The device netlist lacks a node the testbench needs."""


class ParseFailure(SimulationError):
    """Malformed raw output.  ``offset`` is the byte offset of the problem."""

    def __init__(self, msg, offset=0, log=''):
        super(ParseFailure, self).__init__("{0} (at byte {1})".format(msg, offset), log)
        self.offset = offset
