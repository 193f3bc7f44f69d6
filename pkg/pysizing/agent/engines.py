"""Proposal engines produce the next design point plus the reasons for it.

:class:`BaselineEngine` is a seeded coordinate search that needs no network;
:class:`LLMEngine` asks a chat model through the ``apply_sizing`` function
call.  Whatever an engine returns passes through :func:`propose`, which keeps
only declared tunables and clamps values into their bounds.
"""
import math
import logging
from collections import OrderedDict, namedtuple

try:
    import simplejson as json
except ImportError:
    import json

import numpy as np

from pysizing import metrics as m
from pysizing import targets as tg
from pysizing import llm
from pysizing.netlist import ParamPatch, tunable_index
from pysizing.utils import PySizingError, from_spice, to_eng
from pysizing.sim.deck import plan_analyses
from pysizing.agent.prompt import render_report

logger = logging.getLogger(__name__)

Capability = namedtuple('Capability', ['name', 'deterministic', 'requires_network'])


class EngineFailure(PySizingError):
    """The engine could not produce a patch."""


class ProposalEngine(object):
    """Base proposal engine.  Subclasses set ``capability`` and implement
    :meth:`propose`."""
    capability = Capability('abstract', True, False)

    @property
    def name(self):
        return self.capability.name

    def propose(self, bundle, history):
        """Returns a raw ParamPatch for the next iteration.

        Parameters
        ----------
        bundle : PromptBundle
        history : ContextHistory

        """
        raise NotImplementedError


def propose(engine, bundle, tunables, history=None):
    """Asks an engine for a patch and sanitizes it.

    Parameters
    ----------
    engine : ProposalEngine
    bundle : PromptBundle
    tunables : list of TunableParam
    history : ContextHistory, optional

    Returns
    -------
    patch : ParamPatch
        Only declared tunables, keyed by tunable key, every value inside its
        bounds, with a non-empty rationale noting any clamping.

    Raises
    ------
    EngineFailure

    """
    if not tunables:
        raise ValueError("there is nothing to tune")
    raw = engine.propose(bundle, history)
    index = tunable_index(tunables)
    assignments = OrderedDict()
    notes = []
    for (key, param), value in raw.assignments.items():
        tun = index.get((key.lower(), param))
        if tun is None:
            notes.append('ignored {0}.{1}, which is not a tunable parameter'.format(key, param))
            continue
        if not math.isfinite(value):
            notes.append('ignored non-finite value for {0}'.format(tun.label))
            continue
        clamped = tun.clamp(value)
        if clamped != value:
            notes.append('{0} = {1} clamped to {2} (bounds [{3}, {4}])'.format(
                         tun.label, to_eng(value), to_eng(clamped),
                         to_eng(tun.bounds[0]), to_eng(tun.bounds[1])))
        assignments[(tun.key, tun.param)] = clamped
    rationale = (raw.rationale or '').strip() or 'no rationale given'
    if notes:
        logger.warning("%s proposal adjusted: %s", engine.name, '; '.join(notes))
        rationale += '\n\nAdjusted: ' + '; '.join(notes) + '.'
    return ParamPatch(assignments, rationale, raw.meta)


###############################################################################
### Seeded coordinate search
###############################################################################

DEFAULT_STEPS = {'up': 1.25, 'down': 0.8, 'cooldown': 1, 'revert_on_regression': True}


def _sensitivity_table(sensitivities):
    table = {}
    for metric, weights in (sensitivities or {}).items():
        kind = m.kind_from_name(metric)
        table[kind] = sorted(((float(w), label) for label, w in weights.items()),
                             key=lambda wl: (-abs(wl[0]), wl[1]))
    return table


def _worst_margin(record, group):
    """Smallest relative margin of a record; -inf when a metric is missing."""
    check = record.check
    if check is None or check.missing or not check.per_metric:
        return -np.inf
    return min(tg.relative_margin(mc, group[kind]) for kind, mc in check.per_metric.items())


class BaselineEngine(ProposalEngine):
    """Deterministic coordinate perturbation.

    Each proposal picks the failing metric with the worst relative margin in
    the reference record and scales the tunable with the largest sensitivity
    weight for it by ``up`` or ``down``.  The sign of the weight times the
    target direction seeds the first step on a tunable.  After that the
    tunable keeps its last direction when that step raised the worst margin
    and reverses it otherwise.  A direction already tried from the same
    reference record is reversed, and a fully tried tunable passes the turn
    to the next one.  When nothing is left a seeded random move is made.

    Parameters
    ----------
    seed : int
    sensitivities : mapping, optional
        metric -> {tunable label ('key.param') -> signed weight}; a positive
        weight means increasing the tunable increases the metric.  Without a
        table every tunable is a candidate for every metric.
    up, down : float, optional
        Multiplicative steps.
    cooldown : int, optional
        Tunables moved in this many most recent iterations are skipped while
        other candidates remain.
    revert_on_regression : bool, optional
        Propose from the best record so far rather than the latest one.

    """
    capability = Capability('baseline', True, False)

    def __init__(self, seed=0, sensitivities=None, up=1.25, down=0.8, cooldown=1,
                 revert_on_regression=True):
        if not up > 1.0 or not 0.0 < down < 1.0:
            raise ValueError("steps must satisfy up > 1 > down > 0")
        self.seed = int(seed)
        self.sensitivities = _sensitivity_table(sensitivities)
        self.up = up
        self.down = down
        self.cooldown = int(cooldown)
        self.revert_on_regression = revert_on_regression

    def _reference(self, history):
        return history.best() if self.revert_on_regression else history.last

    def _candidates(self, kind, spec, tunables):
        by_label = dict((t.label.lower(), t) for t in tunables)
        sign = 1 if spec.direction == tg.AT_LEAST else -1
        table = self.sensitivities.get(kind)
        if table is None:
            return [(t, sign) for t in tunables]
        out = []
        for weight, label in table:
            tun = by_label.get(label.lower())
            if tun is not None and weight != 0.0:
                out.append((tun, sign * (1 if weight > 0 else -1)))
        return out

    def _direction(self, tun, seed, history):
        """Last direction on the tunable if its step improved the worst
        margin, the reverse if it did not, ``seed`` if it was never moved."""
        for rec in reversed(history.records):
            meta = rec.patch.meta
            if meta.get('tunable') != tun.label:
                continue
            base = [r for r in history.records if r.index == meta.get('base')]
            before = _worst_margin(base[0], history.group) if base else -np.inf
            d = meta['direction']
            return d if _worst_margin(rec, history.group) > before else -d
        return seed

    def _step(self, tun, value, direction):
        lo, hi = tun.bounds
        if value <= 0.0:
            new = lo + 0.05 * (hi - lo) if direction > 0 else value
        else:
            new = value * (self.up if direction > 0 else self.down)
        return tun.clamp(new)

    def propose(self, bundle, history):
        tunables = history.tunables
        group = history.group
        last = history.last
        ref = self._reference(history)
        if ref.check.overall_pass:
            return ParamPatch({}, 'no failing metrics', {'engine': self.name})
        tried = set()
        for rec in history.records:
            meta = rec.patch.meta
            if meta.get('base') == ref.index and 'tunable' in meta:
                tried.add((meta['tunable'], meta['direction']))
        recent = set()
        for rec in history.records[-self.cooldown:] if self.cooldown > 0 else ():
            if 'tunable' in rec.patch.meta:
                recent.add(rec.patch.meta['tunable'])

        failing = []
        for kind, mc in ref.check.per_metric.items():
            if not mc.passed:
                failing.append((tg.relative_margin(mc, group[kind]), kind))
        failing.sort()

        move = None
        for _, kind in failing:
            cands = self._candidates(kind, group[kind], tunables)
            ordered = [c for c in cands if c[0].label not in recent] + \
                [c for c in cands if c[0].label in recent]
            for tun, seed in ordered:
                value = ref.design[(tun.key, tun.param)]
                direction = self._direction(tun, seed, history)
                for d in (direction, -direction):
                    if (tun.label, d) in tried:
                        continue
                    new = self._step(tun, value, d)
                    if new == value:
                        continue
                    move = (kind, tun, d, value, new)
                    break
                if move is not None:
                    break
            if move is not None:
                break

        rng_note = ''
        if move is None:
            rng = np.random.default_rng([self.seed, len(history)])
            order = rng.permutation(len(tunables))
            d = 1 if rng.random() < 0.5 else -1
            kind = failing[0][1] if failing else sorted(ref.check.missing)[0]
            for i in order:
                tun = tunables[int(i)]
                value = ref.design[(tun.key, tun.param)]
                for dd in (d, -d):
                    new = self._step(tun, value, dd)
                    if new != value:
                        move = (kind, tun, dd, value, new)
                        break
                if move is not None:
                    break
            rng_note = ' (random move: the sensitivity candidates are exhausted)'
            if move is None:
                return ParamPatch({}, 'every tunable is pinned at a bound; no move left',
                                  {'engine': self.name})

        kind, tun, d, value, new = move
        assignments = OrderedDict()
        for key, v in ref.design.items():
            if last.design.get(key) != v:
                assignments[key] = v
        assignments[(tun.key, tun.param)] = new
        factor = self.up if d > 0 else self.down
        if kind in ref.check.per_metric:
            mc = ref.check.per_metric[kind]
            spec = group[kind]
            status = '{0} is {1} against accepted {2} {3} (margin {4:+.1%})'.format(
                m.LABELS[kind], m.display_value(kind, ref.report[kind].value),
                '>=' if spec.direction == tg.AT_LEAST else '<=',
                m.display_value(kind, mc.relaxed_bound), tg.relative_margin(mc, spec))
        else:
            status = '{0} could not be measured'.format(m.LABELS[kind])
        rationale = ('Worst failing metric: {0}. {1} {2} from {3} to {4} (x{5:g}){6}, '
                     'starting from iteration {7}.').format(
            status, 'Increasing' if d > 0 else 'Decreasing', tun.label, to_eng(value),
            to_eng(new), factor, rng_note, ref.index)
        if ref.index != last.index:
            rationale += ' Iteration {0} regressed, so its changes are reverted.'.format(
                last.index)
        meta = {'engine': self.name, 'base': ref.index, 'tunable': tun.label,
                'direction': d, 'metric': kind}
        return ParamPatch(assignments, rationale, meta)


def baseline_engine(seed=0, step_schedule=None, sensitivities=None):
    """A :class:`BaselineEngine` from a step schedule mapping with keys
    ``up``, ``down``, ``cooldown`` and ``revert_on_regression``."""
    steps = dict(DEFAULT_STEPS)
    steps.update(step_schedule or {})
    return BaselineEngine(seed, sensitivities, steps['up'], steps['down'], steps['cooldown'],
                          steps['revert_on_regression'])


###############################################################################
### Chat model engine
###############################################################################

_sizing_schema = {
    'type': 'object',
    'properties': {
        'assignments': {
            'type': 'array',
            'description': 'One entry per changed parameter.',
            'items': {
                'type': 'object',
                'properties': {
                    'name': {'type': 'string',
                             'description': 'Tunable label or device name, eg M1,M2 or M5'},
                    'param': {'type': 'string', 'enum': ['W', 'L', 'DC']},
                    'value': {'type': 'string',
                              'description': 'New value in SPICE notation, eg 12u'},
                    },
                'required': ['name', 'param', 'value'],
                },
            },
        'rationale': {'type': 'string',
                      'description': 'Why these changes should move the failing metrics.'},
        },
    'required': ['assignments', 'rationale'],
    }

_metric_names = sorted(set(m.SHORT_NAMES.values()))

TOOLS = [
    llm.ToolSchema('apply_sizing', 'Apply new device sizes and bias voltages to the netlist. '
                   'The design is then simulated and measured.', _sizing_schema),
    llm.ToolSchema('run_analysis', 'List the simulations that measure the given metrics.',
                   {'type': 'object',
                    'properties': {'metrics': {'type': 'array',
                                               'items': {'type': 'string',
                                                         'enum': _metric_names}}},
                    'required': ['metrics']}),
    llm.ToolSchema('measure_metric', 'Look up a measured metric value from an iteration.',
                   {'type': 'object',
                    'properties': {'metric': {'type': 'string', 'enum': _metric_names},
                                   'iteration': {'type': 'integer'}},
                    'required': ['metric']}),
    llm.ToolSchema('report_comparison', 'Compare the results of an iteration with the '
                   'target performance.',
                   {'type': 'object', 'properties': {'iteration': {'type': 'integer'}}}),
    ]


def parse_sizing(arguments):
    """Parses apply_sizing arguments strictly.

    Returns
    -------
    patch : ParamPatch
        Unsanitized.

    Raises
    ------
    ValueError
        With a message suitable to send back to the model.

    """
    try:
        data = json.loads(arguments)
    except ValueError as e:
        raise ValueError("arguments are not valid JSON: {0}".format(e))
    if not isinstance(data, dict) or not isinstance(data.get('assignments'), list):
        raise ValueError("'assignments' must be a list of {name, param, value} objects")
    assignments = OrderedDict()
    for i, item in enumerate(data['assignments']):
        if not isinstance(item, dict) or not all(k in item for k in ('name', 'param', 'value')):
            raise ValueError("assignment {0} needs name, param and value".format(i))
        value = item['value']
        try:
            value = float(value) if isinstance(value, (int, float)) else from_spice(str(value))
        except ValueError:
            raise ValueError("assignment {0}: {1!r} is not a number".format(i, value))
        assignments[(str(item['name']), str(item['param']).upper())] = value
    rationale = data.get('rationale') or ''
    if not isinstance(rationale, str):
        raise ValueError("'rationale' must be text")
    return ParamPatch(assignments, rationale)


class LLMEngine(ProposalEngine):
    """Proposals from a chat model using function calling.

    Parameters
    ----------
    client : object
        Anything with ``complete(messages, tools)``: a
        :class:`~pysizing.llm.ChatClient` or a transcript wrapper.
    name : str, optional
        Capability name, eg the model id.
    max_tool_rounds : int, optional
        Read-only tool calls answered before an apply_sizing call is due.
    repair_attempts : int, optional
        Re-asks after an unusable reply before giving up.

    """

    def __init__(self, client, name='llm', max_tool_rounds=4, repair_attempts=1):
        self.client = client
        self.capability = Capability(name, False, True)
        self.max_tool_rounds = max_tool_rounds
        self.repair_attempts = repair_attempts

    def _record(self, history, args):
        i = args.get('iteration')
        if i is None:
            return history.last
        if not 1 <= int(i) <= len(history):
            raise ValueError("iteration must be between 1 and {0}".format(len(history)))
        return history.records[int(i) - 1]

    def answer(self, call, history):
        """Result text for a read-only tool call."""
        try:
            args = json.loads(call.arguments or '{}')
            if call.name == 'run_analysis':
                kinds = [m.kind_from_name(n) for n in args.get('metrics', [])]
                if history.tb_base is None:
                    return 'analysis plan unavailable'
                plan = plan_analyses(kinds, history.tb_base)
                return '\n'.join('{0} on {1}'.format(spec.kind, tb.topology)
                                 for spec, tb in plan) + \
                    '\nSimulations run automatically after apply_sizing.'
            if call.name == 'measure_metric':
                kind = m.kind_from_name(args['metric'])
                rec = self._record(history, args)
                if rec is None or rec.report is None or kind not in rec.report:
                    return '{0} was not measured'.format(m.LABELS[kind])
                return m.display_value(kind, rec.report[kind].value)
            if call.name == 'report_comparison':
                rec = self._record(history, args)
                if rec is None:
                    return 'nothing measured yet'
                return render_report(rec.report, history.group)
        except (ValueError, KeyError, TypeError, PySizingError) as e:
            return 'error: {0}'.format(e)
        return 'error: unknown function {0!r}'.format(call.name)

    def _complete(self, messages):
        try:
            return self.client.complete(messages, TOOLS)
        except llm.LLMError as e:
            raise EngineFailure('{0}: {1}'.format(e.__class__.__name__, e))

    def propose(self, bundle, history):
        messages = [llm.system(bundle.system), llm.user(bundle.user_text())]
        rounds = repairs = 0
        while True:
            reply = self._complete(messages)
            messages.append(reply)
            sizing = [c for c in reply.tool_calls if c.name == 'apply_sizing']
            if sizing:
                try:
                    patch = parse_sizing(sizing[0].arguments)
                except ValueError as e:
                    problem = str(e)
                else:
                    if not patch.rationale.strip() and reply.content.strip():
                        patch.rationale = reply.content.strip()
                    patch.meta['engine'] = self.name
                    return patch
                if repairs >= self.repair_attempts:
                    raise EngineFailure('unusable apply_sizing call: {0}'.format(problem))
                repairs += 1
                for call in reply.tool_calls:
                    text = 'invalid arguments: {0}. Call apply_sizing again.'.format(problem) \
                        if call is sizing[0] else 'not run'
                    messages.append(llm.tool_result(call, text))
                continue
            if reply.tool_calls and rounds < self.max_tool_rounds:
                rounds += 1
                for call in reply.tool_calls:
                    messages.append(llm.tool_result(call, self.answer(call, history)))
                continue
            if repairs >= self.repair_attempts:
                raise EngineFailure('the model replied without an apply_sizing call')
            repairs += 1
            for call in reply.tool_calls:
                messages.append(llm.tool_result(call, 'not run: tool budget used up'))
            messages.append(llm.user('Your reply did not contain an apply_sizing call. '
                                     'Call apply_sizing now with your proposed changes.'))
