"""Simulation deck assembly.

A deck is the device netlist with its ``.end`` removed, followed by testbench
harness cards for the requested topology, the analysis card and a ``.control``
block that writes every vector to ``sim.raw`` in ASCII.  Harness elements and
nodes all carry a ``tb`` prefix so they cannot collide with device names.

Harness wiring per topology:

* OPEN_LOOP -- differential AC drive on ``inp`` around ``tb_cm``; a DC-only
  servo (1 GH from ``out`` to ``inn``, 1 GF from ``inn`` to ``tb_cm``) holds
  the operating point while the loop stays open for AC.
* CM_DRIVE -- the same servo with the AC drive on the common-mode node.
* DIFF_DRIVE -- balanced drive, ``inn`` mirrors ``inp`` about ``tb_cm``; no
  servo.
* UNITY_GAIN -- ``out`` shorted to ``inn``, ``inp`` driven (and swept).
* SINGLE_ENDED -- one input ``in`` driven, plus manifest extras.
* FREE_RUN -- no input; transient with initial conditions.
"""
import os
import re
import logging

from pysizing.netlist import serialize_netlist
from pysizing.utils import to_spice
from pysizing.sim import analysis as an
from pysizing.sim.analysis import AnalysisSpec
from pysizing.sim.errors import MissingPort
from pysizing import metrics
from pysizing.pysizing_config import pysizing_conf

logger = logging.getLogger(__name__)

RAW_NAME = 'sim.raw'
DECK_NAME = 'deck.cir'

# harness element names, lower-case in raw output
SWEEP_SOURCE = {
    an.OPEN_LOOP: 'Vtb_ind',
    an.DIFF_DRIVE: 'Vtb_ind',
    an.CM_DRIVE: 'Vtb_cm',
    an.UNITY_GAIN: 'Vtb_in',
    an.SINGLE_ENDED: 'Vtb_in',
    }

_include_pattern = re.compile(r"^(\s*\.(?:include|inc|lib)\s+)(['\"]?)([^'\"\s]+)\2(.*)$",
                              re.IGNORECASE)
_end_pattern = re.compile(r"^\s*\.end\s*$", re.IGNORECASE)


###############################################################################
### Planning
###############################################################################

def default_spec(kind, tb, conf=None):
    """The standard analysis of a kind for a testbench."""
    conf = pysizing_conf if conf is None else conf
    if kind == an.OP:
        return AnalysisSpec.op()
    if kind == an.AC:
        return AnalysisSpec.ac(conf['ac_points_per_decade'], conf['ac_fstart'],
                               conf['ac_fstop'])
    if kind == an.DC_SWEEP:
        return AnalysisSpec.dc(SWEEP_SOURCE[tb.topology], 0.0, tb.supply_v, conf['dc_step'])
    if kind == an.TRAN:
        if tb.topology == an.FREE_RUN:
            return AnalysisSpec.tran(1e-11, 20e-9, uic=True)
        f0 = tb.stimulus.frequency
        period = 1.0 / f0
        return AnalysisSpec.tran(period / 4096, 16 * period)
    raise ValueError("unknown analysis kind {0!r}".format(kind))


def plan_analyses(kinds, tb_base, conf=None, tran=None):
    """Chooses the smallest set of simulations that covers a set of metrics.

    Parameters
    ----------
    kinds : iterable of str
        Metric kinds (see :mod:`pysizing.metrics`).
    tb_base : TestbenchConfig
        Common-mode voltage, load and supply shared by every run.  Its topology
        selects the circuit family (opamp, single-ended or free-running).
    conf : PySizingConfig, optional
    tran : AnalysisSpec, optional
        Transient spec overriding the default (free-running circuits set their
        own stop time in the manifest).

    Returns
    -------
    plan : list of (AnalysisSpec, TestbenchConfig)
        Deduplicated, in a fixed order (AC, OP, DC_SWEEP, TRAN, then topology).

    """
    conf = pysizing_conf if conf is None else conf
    kinds = set(kinds)
    if not kinds:
        raise ValueError("plan_analyses needs at least one metric")
    family = tb_base.family
    needs = set()
    for kind in kinds:
        needs.update(metrics.required_analyses(kind, family))
    plan = []
    order = dict((k, i) for i, k in enumerate(an.ANALYSIS_KINDS))
    torder = dict((t, i) for i, t in enumerate(an.TOPOLOGIES))
    for kind, topology in sorted(needs, key=lambda n: (order[n[0]] if n[0] != an.AC else -1,
                                                       torder[n[1]])):
        stimulus = None
        if kind == an.TRAN and topology != an.FREE_RUN:
            stimulus = tb_base.stimulus or an.Sine(conf['thd_amplitude'], conf['thd_frequency'])
        tb = an.TestbenchConfig(topology, tb_base.vcm, tb_base.load, stimulus,
                                tb_base.supply_v, tb_base.extras)
        spec = tran if (kind == an.TRAN and tran is not None) else default_spec(kind, tb, conf)
        plan.append((spec, tb))
    logger.debug("planned %d analyses for %s", len(plan), sorted(kinds))
    return plan


###############################################################################
### Deck text
###############################################################################

def _num(x):
    return to_spice(x)


def rewrite_includes(text, include_dir):
    """Makes relative .include/.lib paths absolute against include_dir."""
    if include_dir is None:
        return text
    out = []
    for line in text.splitlines():
        mo = _include_pattern.match(line)
        if mo is not None and not os.path.isabs(mo.group(3)):
            path = os.path.abspath(os.path.join(include_dir, mo.group(3)))
            line = '{0}"{1}"{2}'.format(mo.group(1), path, mo.group(4))
        out.append(line)
    return '\n'.join(out) + '\n'


def _load_cards(tb):
    return ['Ctb_load out 0 {0}'.format(_num(tb.load.cl)),
            'Rtb_load out 0 {0}'.format(_num(tb.load.rl))]


def _servo_cards():
    return ['Ltb_fb out inn 1e9', 'Ctb_fb inn tb_cm 1e9']


def harness_cards(analysis, tb):
    """Testbench cards for one analysis on one topology."""
    vcm = _num(tb.vcm)
    kind = analysis.kind
    top = tb.topology
    cards = []
    if top == an.OPEN_LOOP:
        cards.append('Vtb_cm tb_cm 0 DC {0}'.format(vcm))
        if kind == an.DC_SWEEP:
            cards += ['Vtb_ind inp tb_cm DC 0', 'Vtb_inn inn tb_cm DC 0']
        else:
            cards.append('Vtb_ind inp tb_cm DC 0 AC 1')
            cards += _servo_cards()
    elif top == an.CM_DRIVE:
        cards += ['Vtb_cm tb_cm 0 DC {0} AC 1'.format(vcm), 'Vtb_ind inp tb_cm DC 0']
        cards += _servo_cards()
    elif top == an.DIFF_DRIVE:
        cards += ['Vtb_cm tb_cm 0 DC {0}'.format(vcm),
                  'Vtb_ind inp tb_cm DC 0 AC 0.5',
                  'Etb_inn inn tb_cm inp tb_cm -1']
    elif top == an.UNITY_GAIN:
        src = 'Vtb_in inp 0 DC {0}'.format(vcm)
        if kind == an.AC:
            src += ' AC 1'
        elif kind == an.TRAN and tb.stimulus is not None:
            src += ' SIN({0} {1} {2})'.format(vcm, _num(tb.stimulus.amplitude),
                                             _num(tb.stimulus.frequency))
        cards += [src, 'Vtb_fb out inn DC 0']
    elif top == an.SINGLE_ENDED:
        src = 'Vtb_in in 0 DC {0}'.format(vcm)
        if kind == an.AC:
            src += ' AC 1'
        elif kind == an.TRAN and tb.stimulus is not None:
            src += ' SIN({0} {1} {2})'.format(vcm, _num(tb.stimulus.amplitude),
                                             _num(tb.stimulus.frequency))
        cards.append(src)
    cards += _load_cards(tb)
    cards += list(tb.extras)
    return cards


def analysis_card(analysis):
    kind = analysis.kind
    if kind == an.OP:
        return '.op'
    if kind == an.AC:
        return '.ac dec {0} {1} {2}'.format(analysis.per_decade, _num(analysis.fstart),
                                            _num(analysis.fstop))
    if kind == an.DC_SWEEP:
        return '.dc {0} {1} {2} {3}'.format(analysis.source.lower(), _num(analysis.start),
                                           _num(analysis.stop), _num(analysis.step))
    if kind == an.TRAN:
        card = '.tran {0} {1} {2} {0}'.format(_num(analysis.tstep), _num(analysis.tstop),
                                              _num(analysis.tstart))
        if analysis.uic:
            card += ' uic'
        return card
    raise ValueError("unknown analysis kind {0!r}".format(kind))


def check_ports(doc, tb):
    """Raises MissingPort unless the netlist has every node the harness uses."""
    nodes = doc.node_names()
    missing = [p for p in an.PORTS[tb.family] if p not in nodes]
    if missing:
        raise MissingPort("netlist {0!r} lacks port node(s) {1} needed by {2}".format(
                          doc.title, ', '.join(missing), tb.topology))


def build_deck(doc, analysis, tb, include_dir=None):
    """Assembles a complete simulation deck.

    Parameters
    ----------
    doc : NetlistDoc
        Device under test.
    analysis : AnalysisSpec
    tb : TestbenchConfig
    include_dir : str, optional
        Directory relative .include paths are resolved against.

    Returns
    -------
    deck : str
        Deterministic for identical inputs.

    Raises
    ------
    MissingPort
        If a node the testbench wires to is absent.

    """
    check_ports(doc, tb)
    device = serialize_netlist(doc)
    device = '\n'.join(l for l in device.splitlines() if not _end_pattern.match(l))
    device = rewrite_includes(device, include_dir)
    lines = ['* pysizing deck: {0} {1} {2}'.format(doc.title or 'untitled', analysis.kind,
                                                   tb.summary()),
             device.rstrip('\n'),
             '* testbench']
    lines += harness_cards(analysis, tb)
    lines.append(analysis_card(analysis))
    lines += ['.control',
              'set filetype=ascii',
              'run',
              'write {0}'.format(RAW_NAME),
              '.endc',
              '.end']
    return '\n'.join(lines) + '\n'
