"""The ``netlist`` module parses, patches and writes SPICE netlists::

    from pysizing import netlist

A parsed :class:`NetlistDoc` is an immutable value.  Element cards of the kinds
the benchmark circuits use (M, V, I, R, C, L, E, G, D, X) are parsed into
:class:`ElementCard` objects; every other line, comments and dot-directives
included, is kept verbatim as a :class:`Directive` at its original position so
that serialization reproduces the input order.

The tunable surface of a circuit is the W and L of each MOSFET (or matched
group of MOSFETs) plus the DC value of designated bias sources.  Supply sources
and model references are frozen: :func:`apply_patch` refuses to touch them and
:func:`validate_constraints` reports any drift from the baseline.
"""
import re
import math
import hashlib
import logging
from collections import OrderedDict, namedtuple

from pysizing.utils import PySizingError, from_spice, split_spice, to_spice

logger = logging.getLogger(__name__)

# Default bounds, SI units.
W_BOUNDS = (0.4e-6, 1000e-6)
L_BOUNDS = (0.18e-6, 10e-6)
DC_BOUNDS = (0.0, 1.8)
DEFAULT_BOUNDS = {'W': W_BOUNDS, 'L': L_BOUNDS, 'DC': DC_BOUNDS}

SIZE_PARAMS = ('W', 'L')
TUNABLE_PARAMS = ('W', 'L', 'DC')
RAIL_NAMES = frozenset(['vdd', 'vss', 'vcc', 'vee', 'avdd', 'avss', 'dvdd', 'dvss'])
MODEL_DIRECTIVES = ('.model', '.include', '.inc', '.lib')

PARAM_UNITS = {'W': 'm', 'L': 'm', 'AS': 'm2', 'AD': 'm2', 'PS': 'm', 'PD': 'm'}
KIND_UNITS = {'V': 'V', 'I': 'A', 'R': 'Ω', 'C': 'F', 'L': 'H', 'E': '', 'G': 'S'}

_source_function_pattern = re.compile(r"\b(sin|pulse|pwl|exp|sffm|am)\s*\(.*$",
                                      re.IGNORECASE)
_assign_space_pattern = re.compile(r"\s*=\s*")


###############################################################################
### Errors
###############################################################################

class NetlistError(PySizingError):
    """Base class for netlist problems."""


class NetlistSyntaxError(NetlistError, SyntaxError):
    """Malformed element card.  ``lineno`` is the 1-based input line."""

    def __init__(self, msg, lineno):
        SyntaxError.__init__(self, "line {0}: {1}".format(lineno, msg))
        self.lineno = lineno


class UnknownElement(NetlistError, KeyError):
    """A name that does not exist in the netlist."""

    def __str__(self):
        return Exception.__str__(self)


class UnknownTunable(NetlistError, KeyError):
    """A patch key that is not a declared tunable parameter."""

    def __str__(self):
        return Exception.__str__(self)


class ConstraintViolation(NetlistError, ValueError):
    """A patch tried to change a supply source or a model reference."""


class OutOfBounds(NetlistError, ValueError):
    """A tunable value outside its declared bounds."""


###############################################################################
### Values and cards
###############################################################################

class PhysicalValue(namedtuple('PhysicalValue', ['magnitude', 'unit', 'suffix'])):
    """A real magnitude in SI units, its unit, and the SPICE scale suffix the
    value was written with (used when writing it back)."""
    __slots__ = ()

    def __new__(cls, magnitude, unit='', suffix=''):
        magnitude = float(magnitude)
        if not math.isfinite(magnitude):
            raise ValueError("physical values must be finite, got {0!r}".format(magnitude))
        return super(PhysicalValue, cls).__new__(cls, magnitude, unit, suffix)

    @classmethod
    def parse(cls, text, unit=''):
        """Builds a value from SPICE number text, remembering its suffix."""
        _, suffix = split_spice(text)
        return cls(from_spice(text), unit, suffix)

    def to_text(self):
        return to_spice(self.magnitude, self.suffix)

    def with_magnitude(self, magnitude):
        """Same unit and suffix style, new magnitude."""
        return PhysicalValue(magnitude, self.unit, self.suffix)

    def same_as(self, other, rel_tol=1e-9):
        return (self.unit == other.unit and
                math.isclose(self.magnitude, other.magnitude, rel_tol=rel_tol,
                             abs_tol=1e-30))


class Directive(namedtuple('Directive', ['text', 'position'])):
    """A verbatim line (comment, dot-directive or unknown card).  ``position``
    is the number of element cards that precede it."""
    __slots__ = ()


class ElementCard(object):
    """One circuit element.

    Parameters
    ----------
    name : str
        Element name; the first letter encodes the kind.
    nodes : sequence of str
        Ordered node names.
    model_ref : str, optional
        Model (M, D) or subcircuit (X) name.
    params : sequence of (key, PhysicalValue) or mapping, optional
        Named parameters; source cards use 'DC', 'AC', 'ACPHASE', two-terminal
        passives use 'VALUE'.
    extra : str, optional
        Raw trailing text kept verbatim (transient source functions).

    """
    __slots__ = ('_name', '_nodes', '_model_ref', '_params', '_extra')

    def __init__(self, name, nodes, model_ref=None, params=(), extra=''):
        self._name = name
        self._nodes = tuple(nodes)
        self._model_ref = model_ref
        if hasattr(params, 'items'):
            params = params.items()
        self._params = tuple((k.upper(), v) for k, v in params)
        self._extra = extra.strip()

    name = property(lambda self: self._name)
    nodes = property(lambda self: self._nodes)
    model_ref = property(lambda self: self._model_ref)
    extra = property(lambda self: self._extra)

    @property
    def kind(self):
        return self._name[0].upper()

    @property
    def key(self):
        return self._name.lower()

    @property
    def params(self):
        """Copy of the parameters as an ordered dict."""
        return OrderedDict(self._params)

    def param(self, key, default=None):
        key = key.upper()
        for k, v in self._params:
            if k == key:
                return v
        return default

    def with_param(self, key, value):
        """Returns a new card with one parameter replaced (or appended).

        ``value`` may be a PhysicalValue or a float; a float keeps the unit and
        suffix style of the existing value.
        """
        key = key.upper()
        old = self.param(key)
        if not isinstance(value, PhysicalValue):
            if old is not None:
                value = old.with_magnitude(value)
            else:
                value = PhysicalValue(value, _unit_for(self.kind, key))
        params = []
        replaced = False
        for k, v in self._params:
            if k == key:
                params.append((k, value))
                replaced = True
            else:
                params.append((k, v))
        if not replaced:
            params.append((key, value))
        return ElementCard(self._name, self._nodes, self._model_ref, params, self._extra)

    def to_text(self):
        """The card as canonical SPICE text."""
        words = [self._name] + [n.lower() for n in self._nodes]
        kind = self.kind
        params = self.params
        if kind in 'VI':
            if 'DC' in params:
                words += ['DC', params.pop('DC').to_text()]
            if 'AC' in params:
                words += ['AC', params.pop('AC').to_text()]
                if 'ACPHASE' in params:
                    words.append(params.pop('ACPHASE').to_text())
        elif kind in 'RCLEG':
            if 'VALUE' in params:
                words.append(params.pop('VALUE').to_text())
        if self._model_ref is not None:
            words.append(self._model_ref.lower())
        words += ['{0}={1}'.format(k, v.to_text()) for k, v in params.items()]
        if self._extra:
            words.append(self._extra)
        return ' '.join(words)

    def __eq__(self, other):
        if not isinstance(other, ElementCard):
            return NotImplemented
        if self.key != other.key or self.kind != other.kind:
            return False
        if tuple(n.lower() for n in self._nodes) != tuple(n.lower() for n in other._nodes):
            return False
        if (self._model_ref or '').lower() != (other._model_ref or '').lower():
            return False
        if ' '.join(self._extra.lower().split()) != ' '.join(other._extra.lower().split()):
            return False
        mine, theirs = self.params, other.params
        if set(mine) != set(theirs):
            return False
        return all(mine[k].same_as(theirs[k]) for k in mine)

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    __hash__ = None

    def __repr__(self):
        return "ElementCard({0!r})".format(self.to_text())


def _unit_for(kind, key):
    if kind == 'M':
        return PARAM_UNITS.get(key, '')
    if key in ('DC', 'AC', 'VALUE'):
        return KIND_UNITS.get(kind, '')
    return ''


###############################################################################
### Documents
###############################################################################

class NetlistDoc(object):
    """An immutable parsed netlist.

    Parameters
    ----------
    title : str
        Title text ('' when absent).
    elements : sequence of ElementCard
        Element cards in input order.
    directives : sequence of Directive
        Verbatim lines with their positions among the elements.
    source_text_hash : str, optional
        SHA-1 of the text the document was parsed from.

    """
    __slots__ = ('_title', '_elements', '_directives', '_hash', '_index')

    def __init__(self, title, elements, directives=(), source_text_hash=''):
        self._title = title or ''
        self._elements = tuple(elements)
        self._directives = tuple(directives)
        self._hash = source_text_hash
        index = {}
        for card in self._elements:
            if card.key in index:
                raise NetlistError("duplicate element name {0!r}".format(card.name))
            index[card.key] = card
        self._index = index

    title = property(lambda self: self._title)
    elements = property(lambda self: self._elements)
    directives = property(lambda self: self._directives)
    source_text_hash = property(lambda self: self._hash)

    def __contains__(self, name):
        return name.lower() in self._index

    def __len__(self):
        return len(self._elements)

    def element(self, name):
        """Looks up an element card by (case-insensitive) name."""
        try:
            return self._index[name.lower()]
        except KeyError:
            raise UnknownElement("no element named {0!r} in the netlist".format(name))

    def find_element(self, name):
        """Like :meth:`element` but returns None for a missing name."""
        return self._index.get(name.lower())

    def of_kind(self, kind):
        return [c for c in self._elements if c.kind == kind.upper()]

    def mosfets(self):
        return self.of_kind('M')

    def node_names(self):
        """Set of all (lower-case) node names used by element cards."""
        nodes = set()
        for card in self._elements:
            if card.kind == 'X':
                nodes.update(n.lower() for n in card.nodes)
            else:
                nodes.update(n.lower() for n in card.nodes)
        return nodes

    def with_elements(self, replacements):
        """Returns a new document with some cards replaced.

        Parameters
        ----------
        replacements : mapping of name -> ElementCard

        """
        replacements = dict((k.lower(), v) for k, v in replacements.items())
        for key in replacements:
            if key not in self._index:
                raise UnknownElement("no element named {0!r} in the netlist".format(key))
        elements = [replacements.get(c.key, c) for c in self._elements]
        return NetlistDoc(self._title, elements, self._directives, self._hash)

    def with_values(self, values):
        """Returns a new document with parameters replaced in bulk.

        Parameters
        ----------
        values : mapping of (element name, param) -> float

        """
        cards = {}
        for (name, param), value in values.items():
            card = cards.get(name.lower()) or self.element(name)
            cards[name.lower()] = card.with_param(param, value)
        return self.with_elements(cards)

    def model_lines(self):
        """The .model/.include/.lib directive texts, in order."""
        return [d.text.strip() for d in self._directives
                if d.text.strip().lower().startswith(MODEL_DIRECTIVES)]

    def __eq__(self, other):
        if not isinstance(other, NetlistDoc):
            return NotImplemented
        return (self._title.strip() == other._title.strip() and
                self._elements == other._elements and
                tuple((d.text.rstrip(), d.position) for d in self._directives) ==
                tuple((d.text.rstrip(), d.position) for d in other._directives))

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    __hash__ = None

    def __repr__(self):
        return "NetlistDoc(title={0!r}, {1} elements, {2} directives)".format(
            self._title, len(self._elements), len(self._directives))


###############################################################################
### Parsing
###############################################################################

def _logical_lines(text):
    """Yields (lineno, text) with '+' continuation lines folded in."""
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if stripped.startswith('+') and current is not None \
                and not current[1].lstrip().startswith('*'):
            current = (current[0], current[1].rstrip() + ' ' + stripped[1:].strip())
            continue
        if current is not None:
            yield current
        current = (lineno, line.rstrip())
    if current is not None:
        yield current


def _strip_inline_comment(line):
    for marker in (';', ' $ ', '\t$ '):
        idx = line.find(marker)
        if idx >= 0:
            line = line[:idx]
    return line.rstrip()


def _value(token, unit, lineno, card):
    try:
        return PhysicalValue.parse(token, unit)
    except ValueError:
        raise NetlistSyntaxError("cannot parse value {0!r} on {1}".format(token, card),
                                 lineno)


def _split_params(tokens, kind, lineno, name):
    """Splits tokens into positional words and key=value parameters."""
    positional = []
    params = []
    for tok in tokens:
        if '=' in tok:
            key, _, val = tok.partition('=')
            if not key or not val:
                raise NetlistSyntaxError("malformed parameter {0!r} on {1}".format(tok, name),
                                         lineno)
            key = key.upper()
            params.append((key, _value(val, _unit_for(kind, key), lineno, name)))
        elif params:
            raise NetlistSyntaxError("positional word {0!r} after parameters on {1}".format(
                                     tok, name), lineno)
        else:
            positional.append(tok)
    return positional, params


def _parse_mosfet(tokens, lineno):
    name = tokens[0]
    positional, params = _split_params(tokens[1:], 'M', lineno, name)
    if len(positional) != 5:
        raise NetlistSyntaxError("MOSFET {0} needs four nodes and a model, "
                                 "got {1} words".format(name, len(positional)), lineno)
    return ElementCard(name, positional[:4], positional[4], params)


def _parse_two_terminal(tokens, lineno):
    name = tokens[0]
    kind = name[0].upper()
    positional, params = _split_params(tokens[1:], kind, lineno, name)
    if len(positional) != 3:
        raise NetlistSyntaxError("{0} needs two nodes and a value".format(name), lineno)
    value = _value(positional[2], KIND_UNITS.get(kind, ''), lineno, name)
    return ElementCard(name, positional[:2], None, [('VALUE', value)] + params)


def _parse_controlled(tokens, lineno):
    name = tokens[0]
    kind = name[0].upper()
    positional, params = _split_params(tokens[1:], kind, lineno, name)
    if len(positional) != 5:
        raise NetlistSyntaxError("{0} needs four nodes and a gain".format(name), lineno)
    value = _value(positional[4], KIND_UNITS.get(kind, ''), lineno, name)
    return ElementCard(name, positional[:4], None, [('VALUE', value)] + params)


def _parse_diode(tokens, lineno):
    name = tokens[0]
    positional, params = _split_params(tokens[1:], 'D', lineno, name)
    if len(positional) != 3:
        raise NetlistSyntaxError("diode {0} needs two nodes and a model".format(name), lineno)
    return ElementCard(name, positional[:2], positional[2], params)


def _parse_instance(tokens, lineno):
    name = tokens[0]
    positional, params = _split_params(tokens[1:], 'X', lineno, name)
    if len(positional) < 2:
        raise NetlistSyntaxError("instance {0} needs nodes and a subcircuit".format(name),
                                 lineno)
    return ElementCard(name, positional[:-1], positional[-1], params)


def _parse_source(line, lineno):
    mo = _source_function_pattern.search(line)
    extra = ''
    if mo is not None:
        extra = mo.group(0)
        line = line[:mo.start()]
    tokens = line.split()
    name = tokens[0]
    kind = name[0].upper()
    unit = KIND_UNITS[kind]
    if len(tokens) < 3:
        raise NetlistSyntaxError("source {0} needs two nodes".format(name), lineno)
    nodes = tokens[1:3]
    rest = tokens[3:]
    params = []
    i = 0
    while i < len(rest):
        word = rest[i].upper()
        if word == 'DC':
            if i + 1 >= len(rest):
                raise NetlistSyntaxError("DC without a value on {0}".format(name), lineno)
            params.append(('DC', _value(rest[i + 1], unit, lineno, name)))
            i += 2
        elif word == 'AC':
            if i + 1 >= len(rest):
                raise NetlistSyntaxError("AC without a magnitude on {0}".format(name), lineno)
            params.append(('AC', _value(rest[i + 1], unit, lineno, name)))
            i += 2
            if i < len(rest) and rest[i].upper() not in ('DC', 'AC'):
                params.append(('ACPHASE', _value(rest[i], 'degree', lineno, name)))
                i += 1
        elif i == 0:
            params.append(('DC', _value(rest[i], unit, lineno, name)))
            i += 1
        else:
            raise NetlistSyntaxError("unexpected word {0!r} on {1}".format(rest[i], name),
                                     lineno)
    return ElementCard(name, nodes, None, params, extra)


_TOKEN_PARSERS = {
    'M': _parse_mosfet,
    'R': _parse_two_terminal,
    'C': _parse_two_terminal,
    'L': _parse_two_terminal,
    'E': _parse_controlled,
    'G': _parse_controlled,
    'D': _parse_diode,
    'X': _parse_instance,
    }


def parse_netlist(text):
    """Parses SPICE netlist text into a :class:`NetlistDoc`.

    The first line is taken as the title only when it is a comment line; a
    ``.title`` directive also sets the title.  Continuation lines ('+') are
    folded into the card they continue.

    Parameters
    ----------
    text : str
        SPICE netlist source.

    Returns
    -------
    doc : NetlistDoc

    Raises
    ------
    NetlistSyntaxError
        For a malformed element card (wrong node count, unparsable value) or a
        duplicated element name.

    """
    if not text or not text.strip():
        raise NetlistSyntaxError("empty netlist", 1)
    digest = hashlib.sha1(text.encode('utf-8')).hexdigest()
    title = ''
    elements = []
    directives = []
    seen = {}
    first = True
    for lineno, line in _logical_lines(text):
        stripped = line.strip()
        if not stripped:
            continue
        if first:
            first = False
            if stripped.startswith('*'):
                title = stripped[1:].strip()
                continue
        if stripped.startswith('*') or stripped.startswith('.'):
            if stripped.lower().startswith('.title'):
                title = stripped[len('.title'):].strip()
                continue
            directives.append(Directive(line, len(elements)))
            continue
        kind = stripped[0].upper()
        body = _strip_inline_comment(_assign_space_pattern.sub('=', stripped))
        if kind in 'VI':
            card = _parse_source(body, lineno)
        elif kind in _TOKEN_PARSERS:
            card = _TOKEN_PARSERS[kind](body.split(), lineno)
        else:
            directives.append(Directive(line, len(elements)))
            continue
        if card.key in seen:
            raise NetlistSyntaxError("element {0} already defined on line {1}".format(
                                     card.name, seen[card.key]), lineno)
        seen[card.key] = lineno
        elements.append(card)
    logger.debug("parsed netlist %r: %d elements, %d directives", title,
                 len(elements), len(directives))
    return NetlistDoc(title, elements, directives, digest)


def read_netlist(path):
    """Parses a netlist file."""
    with open(path) as f:
        return parse_netlist(f.read())


def serialize_netlist(doc):
    """Writes a document back to runnable SPICE text.

    Element cards are written in canonical form (lower-case nodes and models,
    upper-case parameter keys, values in their original suffix style);
    directives are written verbatim at their original positions.
    """
    lines = []
    if doc.title:
        lines.append('* ' + doc.title)
    directives = list(doc.directives)
    d = 0
    for i, card in enumerate(doc.elements):
        while d < len(directives) and directives[d].position <= i:
            lines.append(directives[d].text)
            d += 1
        lines.append(card.to_text())
    for directive in directives[d:]:
        lines.append(directive.text)
    return '\n'.join(lines) + '\n'


###############################################################################
### Tunables and patches
###############################################################################

class TunableParam(namedtuple('TunableParam', ['key', 'param', 'value', 'bounds',
                                               'group_id', 'members'])):
    """One tunable degree of freedom.

    ``key`` is the label patches use: the group label for matched devices and
    bias sources, otherwise the element name.  ``members`` are the element
    cards that always hold this value.
    """
    __slots__ = ()

    @property
    def element(self):
        return self.members[0]

    def in_bounds(self, magnitude):
        lo, hi = self.bounds
        return lo * (1 - 1e-12) <= magnitude <= hi * (1 + 1e-12)

    def clamp(self, magnitude):
        lo, hi = self.bounds
        return min(max(magnitude, lo), hi)

    @property
    def label(self):
        return '{0}.{1}'.format(self.key, self.param)


class ParamPatch(object):
    """A set of new tunable values plus the reasoning behind them.

    Parameters
    ----------
    assignments : mapping of (key, param) -> float or PhysicalValue
        New values in SI units, keyed by tunable key (group label or element
        name) and parameter (W, L, DC).
    rationale : str, optional
        Why the change was made.
    meta : dict, optional
        Engine bookkeeping carried along with the patch.

    """

    def __init__(self, assignments=None, rationale='', meta=None):
        items = OrderedDict()
        for (key, param), value in (assignments or {}).items():
            if isinstance(value, PhysicalValue):
                value = value.magnitude
            items[(key, param.upper())] = float(value)
        self.assignments = items
        self.rationale = rationale
        self.meta = dict(meta or {})

    def __len__(self):
        return len(self.assignments)

    def __bool__(self):
        return True

    def to_dict(self):
        return {'assignments': [[k, p, v] for (k, p), v in self.assignments.items()],
                'rationale': self.rationale,
                'meta': self.meta}

    @classmethod
    def from_dict(cls, data):
        return cls(OrderedDict(((k, p), v) for k, p, v in data.get('assignments', [])),
                   data.get('rationale', ''), data.get('meta'))

    def __repr__(self):
        return "ParamPatch({0!r})".format(dict(self.assignments))


def _policy_bounds(policy, key, param):
    bounds = dict(DEFAULT_BOUNDS)
    for k, v in (policy.get('bounds') or {}).items():
        bounds[k.upper()] = tuple(from_spice(x) for x in v)
    per_group = (policy.get('group_bounds') or {}).get(key, {})
    for k, v in per_group.items():
        bounds[k.upper()] = tuple(from_spice(x) for x in v)
    lo, hi = bounds[param]
    if not lo >= 0.0 or not hi > lo:
        raise NetlistError("bad bounds {0!r} for {1}.{2}".format((lo, hi), key, param))
    if param in SIZE_PARAMS and lo <= 0.0:
        raise NetlistError("size bounds must be positive for {0}.{1}".format(key, param))
    return (lo, hi)


def _policy_groups(policy):
    groups = policy.get('groups') or {}
    if isinstance(groups, dict):
        return list(groups.items())
    return [(','.join(members), members) for members in groups]


def policy_biases(policy):
    """The bias sources of a policy as (label, element name) pairs."""
    biases = (policy or {}).get('biases') or {}
    if isinstance(biases, dict):
        return list(biases.items())
    return [(name, name) for name in biases]


def extract_tunables(doc, policy=None):
    """Lists the tunable parameters of a netlist.

    Parameters
    ----------
    doc : NetlistDoc
    policy : dict, optional
        Grouping rules: ``groups`` (label -> member MOSFET names), ``biases``
        (label -> voltage source name), ``fixed`` (MOSFETs to leave alone),
        ``bounds`` (param -> [lo, hi]) and ``group_bounds``.  Without a policy
        every MOSFET contributes one W and one L tunable.

    Returns
    -------
    tunables : list of TunableParam
        Groups in policy order, then ungrouped MOSFETs in netlist order, then
        biases.

    Raises
    ------
    UnknownElement
        If the policy names a device that is not in the netlist.

    """
    policy = policy or {}
    tunables = []
    grouped = set(n.lower() for n in (policy.get('fixed') or []))
    for n in grouped:
        doc.element(n)
    size_params = tuple(p.upper() for p in policy.get('params', SIZE_PARAMS))

    def add_sizes(key, group_id, members):
        cards = [doc.element(m) for m in members]
        for card in cards:
            if card.kind != 'M':
                raise NetlistError("{0} in group {1!r} is not a MOSFET".format(card.name, key))
        for param in size_params:
            value = cards[0].param(param)
            if value is None:
                raise NetlistError("{0} has no {1} parameter".format(cards[0].name, param))
            bounds = _policy_bounds(policy, key, param)
            tun = TunableParam(key, param, value, bounds, group_id,
                               tuple(c.name for c in cards))
            if not tun.in_bounds(value.magnitude):
                raise OutOfBounds("{0} = {1} outside {2}".format(tun.label, value.to_text(),
                                                                 bounds))
            tunables.append(tun)

    for label, members in _policy_groups(policy):
        add_sizes(label, label, members)
        grouped.update(m.lower() for m in members)
    for card in doc.mosfets():
        if card.key not in grouped:
            add_sizes(card.name, None, [card.name])

    for label, name in policy_biases(policy):
        card = doc.element(name)
        if card.kind != 'V':
            raise NetlistError("bias {0!r} ({1}) is not a voltage source".format(label, name))
        value = card.param('DC')
        if value is None:
            raise NetlistError("bias source {0} has no DC value".format(name))
        bounds = _policy_bounds(policy, label, 'DC')
        tun = TunableParam(label, 'DC', value, bounds, label, (card.name,))
        if not tun.in_bounds(value.magnitude):
            raise OutOfBounds("{0} = {1} outside {2}".format(tun.label, value.to_text(), bounds))
        tunables.append(tun)
    logger.debug("extracted %d tunables", len(tunables))
    return tunables


def tunable_index(tunables):
    """Maps (lower-case key or member name, param) to its TunableParam."""
    index = {}
    for tun in tunables:
        index[(tun.key.lower(), tun.param)] = tun
        for member in tun.members:
            index.setdefault((member.lower(), tun.param), tun)
    return index


def current_values(doc, tunables):
    """Reads the present value of each tunable from a document.

    Returns
    -------
    values : OrderedDict of (key, param) -> float

    """
    values = OrderedDict()
    for tun in tunables:
        values[(tun.key, tun.param)] = doc.element(tun.members[0]).param(tun.param).magnitude
    return values


def supply_sources(doc, exclude=()):
    """Names of the voltage sources treated as supplies.

    A supply is a voltage source, other than the excluded (bias) sources, that
    touches a rail node or is named after one.
    """
    exclude = set(e.lower() for e in exclude)
    names = []
    for card in doc.of_kind('V'):
        if card.key in exclude:
            continue
        stem = card.key[1:]
        if stem in RAIL_NAMES or card.key in RAIL_NAMES or \
                any(n.lower() in RAIL_NAMES for n in card.nodes):
            names.append(card.name)
    return names


def apply_patch(doc, patch, baseline, tunables):
    """Applies a patch, returning a new document.

    Every member of a group receives the new value.  The patch is checked
    completely before anything is applied, so a rejected patch never yields a
    partially-modified document.

    Parameters
    ----------
    doc : NetlistDoc
        Document to patch.
    patch : ParamPatch
    baseline : NetlistDoc
        The user's original netlist; supplies and models must match it.
    tunables : list of TunableParam
        The declared tunable surface.

    Returns
    -------
    new_doc : NetlistDoc

    Raises
    ------
    ConstraintViolation
        If the patch touches a supply source or a model reference.
    OutOfBounds
        If a value exceeds its declared bounds.
    UnknownTunable
        If a key is not a declared tunable.

    """
    if not patch.assignments:
        return doc
    index = tunable_index(tunables)
    bias_names = [m for t in tunables if t.param == 'DC' for m in t.members]
    supplies = set(s.lower() for s in supply_sources(baseline, exclude=bias_names))
    resolved = []
    for (key, param), value in patch.assignments.items():
        if param in ('MODEL', 'MODEL_REF'):
            raise ConstraintViolation("{0}: model references are fixed".format(key))
        if key.lower() in supplies:
            raise ConstraintViolation("{0}: supply sources are fixed".format(key))
        tun = index.get((key.lower(), param))
        if tun is None:
            raise UnknownTunable("{0}.{1} is not a tunable parameter".format(key, param))
        if not math.isfinite(value) or not tun.in_bounds(value):
            raise OutOfBounds("{0} = {1!r} outside {2}".format(tun.label, value, tun.bounds))
        resolved.append((tun, value))
    cards = {}
    for tun, value in resolved:
        for member in tun.members:
            card = cards.get(member.lower()) or doc.element(member)
            cards[member.lower()] = card.with_param(tun.param, value)
    new_doc = doc.with_elements(cards)
    violations = validate_constraints(new_doc, baseline, supplies=supplies,
                                      biases=bias_names)
    if violations:
        raise ConstraintViolation("; ".join(v.reason for v in violations))
    return new_doc


Violation = namedtuple('Violation', ['element', 'reason'])


def validate_constraints(doc, baseline, supplies=None, biases=()):
    """Compares a document against the baseline's fixed content.

    Parameters
    ----------
    doc : NetlistDoc
    baseline : NetlistDoc
    supplies : iterable of str, optional
        Supply source names; defaults to :func:`supply_sources` of the
        baseline without the bias sources.
    biases : iterable of str, optional
        Bias source names.  Their values may move; their nodes may not.

    Returns
    -------
    violations : list of Violation
        Empty if and only if every supply source, every model reference and
        every model/include directive matches the baseline and every bias source keeps its nodes.

    """
    biases = list(biases)
    if supplies is None:
        supplies = supply_sources(baseline, exclude=biases)
    violations = []
    for name in biases:
        base = baseline.find_element(name)
        card = doc.find_element(name)
        if base is not None and (card is None or card.nodes != base.nodes):
            violations.append(Violation(base.name, "bias source {0} was rewired".format(
                                        base.name)))
    for name in supplies:
        base = baseline.element(name)
        card = doc.find_element(name)
        if card is None:
            violations.append(Violation(base.name, "supply source {0} was removed".format(
                                        base.name)))
            continue
        if card != base:
            violations.append(Violation(base.name, "supply source {0} changed".format(
                                        base.name)))
    for base in baseline.elements:
        if base.model_ref is None:
            continue
        card = doc.find_element(base.name)
        if card is None:
            violations.append(Violation(base.name, "{0} was removed".format(base.name)))
            continue
        if (card.model_ref or '').lower() != base.model_ref.lower():
            violations.append(Violation(base.name, "{0} model changed from {1} to {2}".format(
                                        base.name, base.model_ref, card.model_ref)))
    if doc.model_lines() != baseline.model_lines():
        violations.append(Violation(None, "model/include directives changed"))
    return violations
