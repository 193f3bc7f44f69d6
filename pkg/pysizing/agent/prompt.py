"""Sizing prompts: a system section with the fixed constraints, the four
context parameters, and step-by-step reasoning instructions."""
import logging
from collections import OrderedDict, namedtuple

from pysizing import metrics as m
from pysizing import targets as tg
from pysizing.utils import to_eng

logger = logging.getLogger(__name__)

CONTEXT_PARAMETERS = ('circuit_type', 'previous_results', 'current_results',
                      'target_performance')

_symbols = {tg.AT_LEAST: '≥', tg.AT_MOST: '≤'}

SYSTEM_TEMPLATE = """\
You are an analog circuit designer sizing a fixed-topology {circuit_type}.
Your job is to propose new transistor sizes and bias voltages that move the
simulated performance toward the targets.

Constraints:
- Keep the topology as it is: do not add, remove or rewire devices.
- Maintain the power supply voltage and use the same transistor model.
- Change only the tunable parameters listed below, within their bounds.
  Devices that share a label are matched and always take one value.
- Every proposal must go through the apply_sizing function with one entry per
  changed parameter (name, param, value in SPICE notation) and a rationale.

Tunable parameters (label.param = current value [lower, upper]):
{tunables}
"""

COT_INSTRUCTIONS = """\
Before calling apply_sizing, reason step by step:
1. Compare the current results with the target performance and list the
   metrics that fail, with how far each one is from its accepted bound.
2. Compare the current results with the previous results and note which
   parameter changes helped and which made things worse.
3. For each failing metric, recall which device parameters it depends on
   (for example gain on output resistance and input transconductance, phase
   margin on the ratio of the non-dominant pole to the unity-gain frequency,
   power on bias currents) and the trade-offs against the passing metrics.
4. Choose a small number of changes that address the worst failures without
   breaking the metrics that pass, and state the reason for each change.
5. Call apply_sizing with those changes and your reasoning as the rationale.
"""


class PromptBundle(namedtuple('PromptBundle', ['system', 'context', 'cot_instructions',
                                               'parameters'])):
    """Rendered prompt.  ``parameters`` maps the four context parameter names
    to their rendered text; ``context`` joins them."""
    __slots__ = ()

    def user_text(self):
        return self.context + '\n\n' + self.cot_instructions


def render_target(spec):
    """eg 'PM ≥ 55° (accepted ≥ 52.25°)'."""
    sym = _symbols[spec.direction]
    return '{0} {1} {2} (accepted {1} {3})'.format(
        m.LABELS[spec.kind], sym, m.display_value(spec.kind, spec.value),
        m.display_value(spec.kind, tg.relaxed_bound(spec)))


def render_tunables(tunables, values=None):
    lines = []
    for tun in tunables:
        value = tun.value.magnitude if values is None else values[(tun.key, tun.param)]
        lo, hi = tun.bounds
        members = '' if len(tun.members) == 1 and tun.members[0] == tun.key else \
            ' (devices {0})'.format(', '.join(tun.members))
        lines.append('- {0} = {1} [{2}, {3}]{4}'.format(tun.label, to_eng(value),
                                                        to_eng(lo), to_eng(hi), members))
    return '\n'.join(lines)


def render_report(report, group):
    """One line per targeted metric, with its verdict."""
    check = tg.check_all(report, group)
    lines = []
    for spec in group.targets:
        label = m.LABELS[spec.kind]
        if report is None or spec.kind not in report:
            reason = '' if report is None else report.absent.get(spec.kind, '')
            lines.append('- {0}: not measured{1}'.format(label, ' ({0})'.format(reason)
                                                         if reason else ''))
            continue
        mc = check.per_metric[spec.kind]
        verdict = 'pass' if mc.passed else 'FAIL'
        lines.append('- {0}: {1} [{2}]'.format(label, m.display_value(spec.kind,
                                                                      report[spec.kind].value),
                                               verdict))
        note = report.notes.get(spec.kind)
        if note:
            lines[-1] += ' ({0})'.format(note)
    return '\n'.join(lines)


def render_record(record, group):
    head = 'Iteration {0}'.format(record.index)
    if record.patch.assignments:
        changes = ', '.join('{0}.{1}={2}'.format(k, p, to_eng(v))
                            for (k, p), v in record.patch.assignments.items())
    else:
        changes = 'none (baseline design)' if record.index == 1 else 'none'
    lines = [head, 'Changes: ' + changes]
    if record.index > 1 and record.rationale:
        lines.append('Reasoning: ' + record.rationale)
    if record.failure:
        lines.append('Simulation problems: ' + record.failure)
    lines.append('Results:')
    lines.append(render_report(record.report, group))
    return '\n'.join(lines)


def build_prompt(history):
    """Renders the prompt for the next proposal.

    The last record becomes the current results; all earlier records, oldest
    first, are the previous results.

    Parameters
    ----------
    history : ContextHistory

    Returns
    -------
    bundle : PromptBundle

    """
    group = history.group
    tunables = history.tunables
    last = history.last
    values = last.design if last is not None else None
    system = SYSTEM_TEMPLATE.format(circuit_type=history.circuit_type,
                                    tunables=render_tunables(tunables, values))
    params = OrderedDict()
    params['circuit_type'] = history.circuit_type
    if len(history) > 1:
        params['previous_results'] = '\n\n'.join(render_record(r, group)
                                                 for r in history.records[:-1])
    else:
        params['previous_results'] = 'none'
    if last is None:
        params['current_results'] = ('not yet measured; the unmodified netlist will be '
                                     'simulated first')
    else:
        params['current_results'] = render_record(last, group)
    params['target_performance'] = '\n'.join('- ' + render_target(t) for t in group.targets)
    context = '\n\n'.join('## {0}\n{1}'.format(name.replace('_', ' ').capitalize(), text)
                          for name, text in params.items())
    return PromptBundle(system, context, COT_INSTRUCTIONS, params)
