"""Causal formulas: AST, concrete syntax, and canonical forms.

Concrete syntax::

    formula := or ; or := and ('|' and)* ; and := unary ('&' unary)*
    unary   := '!' unary | atom ; atom := event | do | '(' formula ')'
    do      := '[' assign (',' assign)* ']' '(' formula ')'
    assign  := IDENT '<-' VALUE ; event := IDENT '=' VALUE

Interventions cannot nest: the body of a ``[...]`` is a Boolean
combination of primitive events.
"""

import itertools
import re
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Tuple

from .errors import CapExceeded, FormulaError
from .model import EMPTY, InterventionSet

L = "L"
L_PLUS = "L+"

DEFAULT_LITERAL_CAP = 20


class Formula:
    """Base class of formula nodes; supports ``&``, ``|`` and ``~``."""

    def __and__(self, other):
        return And((self, other))

    def __or__(self, other):
        return Or((self, other))

    def __invert__(self):
        return Not(self)

    def __str__(self):
        return pretty(self)


@dataclass(frozen=True)
class Event(Formula):
    var: str
    value: str

    def __post_init__(self):
        object.__setattr__(self, "value", str(self.value))

    __str__ = Formula.__str__


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    __str__ = Formula.__str__


@dataclass(frozen=True)
class And(Formula):
    args: Tuple[Formula, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    __str__ = Formula.__str__


@dataclass(frozen=True)
class Or(Formula):
    args: Tuple[Formula, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    __str__ = Formula.__str__


@dataclass(frozen=True)
class Do(Formula):
    iv: InterventionSet
    body: Formula

    def __post_init__(self):
        if not isinstance(self.iv, InterventionSet):
            object.__setattr__(self, "iv", InterventionSet.of(self.iv))

    __str__ = Formula.__str__


def conj(*args):
    return args[0] if len(args) == 1 else And(args)


def disj(*args):
    return args[0] if len(args) == 1 else Or(args)


def do(assignments, body):
    return Do(InterventionSet.of(assignments), body)


TRUE = And(())
FALSE = Or(())


# -- traversal ---------------------------------------------------------

def walk(f, iv=EMPTY):
    """Yield ``(node, intervention context)`` pairs, outermost first."""
    yield f, iv
    if isinstance(f, Not):
        yield from walk(f.arg, iv)
    elif isinstance(f, (And, Or)):
        for a in f.args:
            yield from walk(a, iv)
    elif isinstance(f, Do):
        if iv:
            raise FormulaError("nested intervention %s inside [%s]" % (f.iv, iv))
        yield from walk(f.body, f.iv)


def events(f):
    """Set of ``(intervention set, variable)`` pairs the formula reads."""
    return {(iv, node.var) for node, iv in walk(f) if isinstance(node, Event)}


def variables(f):
    names = set()
    for node, iv in walk(f):
        if isinstance(node, Event):
            names.add(node.var)
        elif isinstance(node, Do):
            names.update(node.iv.names)
    return names


def is_simple(f):
    return not any(isinstance(node, Do) for node, _ in walk(f))


# -- parser ------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(<-)|([\[\](),&|!=])|(-?[A-Za-z0-9_.]+))")
_IDENT = re.compile(r"[A-Za-z_]\w*\Z")


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise FormulaError("unexpected character %r" % text[pos], text, pos)
            start = m.start(m.lastindex)
            self.tokens.append((m.group(m.lastindex), m.lastindex == 3, start))
            pos = m.end()
        self.tokens.append(("", False, len(text)))
        self.i = 0
        self.in_do = False

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return FormulaError(message, self.text, tok[2])

    def expect(self, symbol):
        tok = self.next()
        if tok[1] or tok[0] != symbol:
            found = repr(tok[0]) if tok[0] else "end of input"
            raise self.error("expected %r, found %s" % (symbol, found), tok)
        return tok

    def name(self, what):
        tok = self.next()
        if not tok[1]:
            found = repr(tok[0]) if tok[0] else "end of input"
            raise self.error("expected %s, found %s" % (what, found), tok)
        if what == "variable" and not _IDENT.match(tok[0]):
            raise self.error("bad variable name %r" % tok[0], tok)
        return tok

    def formula(self):
        items = [self.conjunction()]
        while self.peek()[0] == "|" and not self.peek()[1]:
            self.next()
            items.append(self.conjunction())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def conjunction(self):
        items = [self.unary()]
        while self.peek()[0] == "&" and not self.peek()[1]:
            self.next()
            items.append(self.unary())
        return items[0] if len(items) == 1 else And(tuple(items))

    def unary(self):
        tok = self.peek()
        if tok[0] == "!" and not tok[1]:
            self.next()
            return Not(self.unary())
        return self.atom()

    def atom(self):
        tok = self.peek()
        if tok[1]:
            var = self.name("variable")
            self.expect("=")
            value = self.name("value")
            return _Located(Event(var[0], value[0]), var[2], value[2])
        if tok[0] == "(":
            self.next()
            inner = self.formula()
            self.expect(")")
            return inner
        if tok[0] == "[":
            if self.in_do:
                raise self.error("nested intervention")
            self.next()
            pairs = [self.assign()]
            while self.peek()[0] == "," and not self.peek()[1]:
                self.next()
                pairs.append(self.assign())
            self.expect("]")
            self.expect("(")
            self.in_do = True
            body = self.formula()
            self.in_do = False
            self.expect(")")
            names = [p[0] for p in pairs]
            for k, name in enumerate(names):
                if name in names[:k]:
                    raise FormulaError("variable %s intervened on twice" % name,
                                       self.text, pairs[k][2])
            iv = InterventionSet(tuple((p[0], p[1]) for p in pairs))
            return _LocatedDo(Do(iv, body), pairs)
        found = repr(tok[0]) if tok[0] else "end of input"
        raise self.error("expected an event, '[' or '(', found %s" % found)

    def assign(self):
        var = self.name("variable")
        self.expect("<-")
        value = self.name("value")
        return (var[0], value[0], var[2], value[2])


class _Located:
    """Parse-time wrapper carrying source positions for binding checks."""

    def __init__(self, node, var_pos, value_pos):
        self.node = node
        self.var_pos = var_pos
        self.value_pos = value_pos


class _LocatedDo:
    def __init__(self, node, pairs):
        self.node = node
        self.pairs = pairs


def _strip(f, text, cbn, language, positions):
    if isinstance(f, _Located):
        positions.append((f.node.var, f.node.value, f.var_pos, f.value_pos))
        return f.node
    if isinstance(f, _LocatedDo):
        for name, value, npos, vpos in f.pairs:
            positions.append((name, value, npos, vpos))
        return Do(f.node.iv, _strip(f.node.body, text, cbn, language, positions))
    if isinstance(f, Not):
        return Not(_strip(f.arg, text, cbn, language, positions))
    if isinstance(f, And):
        return And(tuple(_strip(a, text, cbn, language, positions) for a in f.args))
    if isinstance(f, Or):
        return Or(tuple(_strip(a, text, cbn, language, positions) for a in f.args))
    return f


def parse(text, cbn=None, language=L_PLUS) -> Formula:
    """Parse ``text``; with ``cbn``, also check names, values and the language.

    Under ``language="L"`` exogenous variables may appear neither in
    events nor in interventions.
    """
    p = _Parser(text)
    if p.peek()[0] == "" and not p.peek()[1]:
        raise p.error("empty formula")
    raw = p.formula()
    if p.i != len(p.tokens) - 1:
        raise p.error("unexpected %r" % p.peek()[0])
    positions = []
    f = _strip(raw, text, cbn, language, positions)
    if cbn is not None:
        for name, value, npos, vpos in positions:
            if name not in cbn.names:
                raise FormulaError("unknown variable %s" % name, text, npos)
            if value not in cbn.domain(name):
                raise FormulaError("value %s outside the domain of %s" % (value, name), text, vpos)
            if language == L and cbn.is_exogenous(name):
                raise FormulaError("exogenous variable %s is not allowed in L" % name, text, npos)
    return f


def in_language_l(f, cbn):
    return not any(cbn.is_exogenous(v) for v in variables(f))


# -- printing ----------------------------------------------------------

def pretty(f) -> str:
    return _pretty(f, 0)


def _pretty(f, prec):
    # prec: 0 = or-level, 1 = and-level, 2 = unary operand
    if isinstance(f, Event):
        return "%s=%s" % (f.var, f.value)
    if isinstance(f, Not):
        return "!" + _pretty(f.arg, 2)
    if isinstance(f, Do):
        return "[%s](%s)" % (f.iv, _pretty(f.body, 0))
    if isinstance(f, And):
        if not f.args:
            return "(true)"
        s = " & ".join(_pretty(a, 2) for a in f.args)
        return s if prec <= 1 and len(f.args) > 1 else "(%s)" % s
    if isinstance(f, Or):
        if not f.args:
            return "(false)"
        s = " | ".join(_pretty(a, 2) for a in f.args)
        return s if prec == 0 and len(f.args) > 1 else "(%s)" % s
    raise TypeError("not a formula: %r" % (f,))


# -- evaluation on explicit worlds -------------------------------------

def evaluate(f, value_of, iv=EMPTY):
    """Classical truth of ``f`` where ``value_of(iv, var)`` gives values."""
    if isinstance(f, Event):
        return value_of(iv, f.var) == f.value
    if isinstance(f, Not):
        return not evaluate(f.arg, value_of, iv)
    if isinstance(f, And):
        return all(evaluate(a, value_of, iv) for a in f.args)
    if isinstance(f, Or):
        return any(evaluate(a, value_of, iv) for a in f.args)
    if isinstance(f, Do):
        if iv:
            raise FormulaError("nested intervention %s inside [%s]" % (f.iv, iv))
        return evaluate(f.body, value_of, f.iv)
    raise TypeError("not a formula: %r" % (f,))


# -- rewrites ----------------------------------------------------------

def push_negations(f, negate=False) -> Formula:
    """Negation normal form; a negated intervention becomes an intervention on the negation."""
    if isinstance(f, Event):
        return Not(f) if negate else f
    if isinstance(f, Not):
        return push_negations(f.arg, not negate)
    if isinstance(f, And):
        args = tuple(push_negations(a, negate) for a in f.args)
        return Or(args) if negate else And(args)
    if isinstance(f, Or):
        args = tuple(push_negations(a, negate) for a in f.args)
        return And(args) if negate else Or(args)
    if isinstance(f, Do):
        return Do(f.iv, push_negations(f.body, negate))
    raise TypeError("not a formula: %r" % (f,))


def _flatten_and(args):
    out = []
    for a in args:
        if isinstance(a, And):
            out.extend(_flatten_and(a.args))
        else:
            out.append(a)
    return out


def merge_same_interventions(f) -> Formula:
    """Within each conjunction, fold interventions with the same set into one."""
    if isinstance(f, Event):
        return f
    if isinstance(f, Not):
        return Not(merge_same_interventions(f.arg))
    if isinstance(f, Or):
        return Or(tuple(merge_same_interventions(a) for a in f.args))
    if isinstance(f, Do):
        return Do(f.iv, merge_same_interventions(f.body))
    if isinstance(f, And):
        args = [merge_same_interventions(a) for a in _flatten_and(f.args)]
        bodies = {}
        out = []
        for a in args:
            if isinstance(a, Do):
                if a.iv not in bodies:
                    bodies[a.iv] = []
                    out.append(a.iv)
                bodies[a.iv].append(a.body)
            else:
                out.append(a)
        merged = []
        for item in out:
            if isinstance(item, InterventionSet):
                parts = bodies[item]
                if len(parts) == 1:
                    merged.append(Do(item, parts[0]))
                else:
                    merged.append(Do(item, And(tuple(_flatten_and(parts)))))
            else:
                merged.append(item)
        return And(tuple(merged))
    raise TypeError("not a formula: %r" % (f,))


# -- canonical DNF -----------------------------------------------------

@dataclass(frozen=True, order=True)
class Literal:
    var: str
    value: str
    positive: bool = True

    def to_formula(self):
        e = Event(self.var, self.value)
        return e if self.positive else Not(e)

    def __str__(self):
        return "%s%s=%s" % ("" if self.positive else "!", self.var, self.value)


Conjunction = Tuple[Literal, ...]


@dataclass(frozen=True)
class Disjunct:
    """A simple conjunction plus intervention parts with pairwise distinct sets."""

    simple: Conjunction = ()
    parts: Tuple[Tuple[InterventionSet, Conjunction], ...] = ()

    def to_formula(self):
        items = [lit.to_formula() for lit in self.simple]
        for iv, body in self.parts:
            items.append(Do(iv, conj(*[lit.to_formula() for lit in body]) if body else TRUE))
        if not items:
            return TRUE
        return conj(*items)

    def literals(self):
        """Yield ``(intervention set, literal)`` pairs, simple part under the empty set."""
        for lit in self.simple:
            yield EMPTY, lit
        for iv, body in self.parts:
            for lit in body:
                yield iv, lit

    def __str__(self):
        text = pretty(self.to_formula())
        return text if text != "(true)" else "true"


@dataclass(frozen=True)
class CanonicalDNF:
    disjuncts: Tuple[Disjunct, ...]

    def to_formula(self):
        if not self.disjuncts:
            return FALSE
        return disj(*[d.to_formula() for d in self.disjuncts])

    def __iter__(self) -> Iterator[Disjunct]:
        return iter(self.disjuncts)

    def __len__(self):
        return len(self.disjuncts)


def _domains_of(domains):
    if domains is None:
        return {}
    if hasattr(domains, "variables") and hasattr(domains, "domain"):
        return {v.name: v.domain for v in domains.variables}
    return dict(domains)


def to_canonical_dnf(f, domains=None, max_literals=DEFAULT_LITERAL_CAP) -> CanonicalDNF:
    """Mutually exclusive DNF of ``f``.

    Every primitive event read by ``f`` is tagged with the intervention it
    sits under.  Each tagged variable takes one of the values ``f``
    mentions for it, or a residual "none of these" class.  The disjuncts
    are exactly the total choices that make ``f`` true, so any two of them
    disagree on at least one tagged variable.

    ``domains`` (a CBN or a name -> values mapping) lets the residual class
    collapse to a single positive event when only one value remains.
    """
    doms = _domains_of(domains)
    mentioned: Dict[Tuple[InterventionSet, str], list] = {}
    for node, iv in walk(f):
        if isinstance(node, Event):
            vals = mentioned.setdefault((iv, node.var), [])
            if node.value not in vals:
                vals.append(node.value)
    keys = sorted(mentioned, key=lambda k: (len(k[0]) > 0, k[0].assignments, k[1]))
    if len(keys) > max_literals:
        raise CapExceeded("canonical DNF over %d tagged variables exceeds the cap of %d"
                          % (len(keys), max_literals))

    choices = []
    for key in keys:
        vals = mentioned[key]
        opts = [(v, (Literal(key[1], v),)) for v in vals]
        dom = doms.get(key[1])
        rest = [v for v in dom if v not in vals] if dom is not None else None
        if rest is None or len(rest) > 1:
            opts.append((None, tuple(Literal(key[1], v, False) for v in sorted(vals))))
        elif len(rest) == 1:
            opts.append((rest[0], (Literal(key[1], rest[0]),)))
        choices.append(opts)

    disjuncts = []
    for combo in itertools.product(*choices):
        assignment = {key: opt[0] for key, opt in zip(keys, combo)}
        if not evaluate(f, lambda iv, var: assignment[(iv, var)]):
            continue
        simple = []
        parts: Dict[InterventionSet, list] = {}
        for key, opt in zip(keys, combo):
            if key[0]:
                parts.setdefault(key[0], []).extend(opt[1])
            else:
                simple.extend(opt[1])
        disjuncts.append(Disjunct(
            tuple(simple),
            tuple((iv, tuple(body)) for iv, body in sorted(parts.items(), key=lambda kv: kv[0].assignments))))
    return CanonicalDNF(tuple(disjuncts))


def _literal_table(d):
    table = {}
    for iv, lit in d.literals():
        pos, neg = table.setdefault((iv, lit.var), (set(), set()))
        (pos if lit.positive else neg).add(lit.value)
    return table


def inconsistent(d1: Disjunct, d2: Disjunct) -> bool:
    """Literal scan: some event is asserted by one disjunct and excluded by the other."""
    t1 = _literal_table(d1)
    t2 = _literal_table(d2)
    for key in t1.keys() & t2.keys():
        pos1, neg1 = t1[key]
        pos2, neg2 = t2[key]
        if pos1 & neg2 or pos2 & neg1:
            return True
        if pos1 and pos2 and pos1 != pos2:
            return True
    return False


def pairwise_exclusive(dnf: CanonicalDNF) -> bool:
    ds = dnf.disjuncts
    return all(inconsistent(ds[i], ds[j])
               for i in range(len(ds)) for j in range(i + 1, len(ds)))


# -- per-disjunct simplification ---------------------------------------

class _Conj:
    """Mutable conjunction of literals over one intervention context."""

    def __init__(self, literals=()):
        self.pos = {}
        self.neg = {}
        self.ok = True
        for lit in literals:
            self.add(lit)

    def add(self, lit):
        if lit.positive:
            have = self.pos.get(lit.var)
            if have is not None and have != lit.value:
                self.ok = False
            if lit.value in self.neg.get(lit.var, ()):
                self.ok = False
            self.pos[lit.var] = lit.value
        else:
            if self.pos.get(lit.var) == lit.value:
                self.ok = False
            self.neg.setdefault(lit.var, set()).add(lit.value)

    def literals(self):
        out = [Literal(v, x) for v, x in self.pos.items()]
        for v, xs in self.neg.items():
            if v in self.pos:
                continue  # implied by the positive literal
            out.extend(Literal(v, x, False) for x in xs)
        return tuple(sorted(out))


def simplify_disjunct(d: Disjunct, cbn) -> Optional[Disjunct]:
    """Drop redundant interventions and pull non-descendant events out.

    Returns ``None`` when the disjunct is unsatisfiable (for example
    ``[X<-1](X=0)`` or two clashing literals after pulling out).

    An assignment ``X<-x`` is redundant when the simple part already says
    ``X=x`` and no other variable of the same set is an ancestor of ``X``;
    with such an ancestor intervened on, ``X`` could move away from ``x``
    and the assignment is kept.
    """
    simple = _Conj(d.simple)
    parts = [(iv, tuple(body)) for iv, body in d.parts]
    while True:
        if not simple.ok:
            return None
        changed = False
        merged: Dict[InterventionSet, list] = {}
        for iv, body in parts:
            kept = dict(iv.mapping)
            for name in [n for n in cbn.order if n in kept]:
                if simple.pos.get(name) != kept[name]:
                    continue
                if (set(kept) - {name}) & cbn.ancestors(name):
                    continue
                del kept[name]
            new_iv = InterventionSet.of(kept)
            reach = set()
            for name in new_iv.names:
                reach |= cbn.descendants(name)
            rest = []
            for lit in body:
                if lit.var in new_iv:
                    if (new_iv.mapping[lit.var] == lit.value) != lit.positive:
                        return None
                elif lit.var in reach:
                    rest.append(lit)
                else:
                    simple.add(lit)
            if new_iv != iv or len(rest) != len(body):
                changed = True
            if rest:
                merged.setdefault(new_iv, []).extend(rest)
        if len(merged) != len(parts):
            changed = True
        parts = []
        for iv, lits in merged.items():
            c = _Conj(lits)
            if not c.ok:
                return None
            parts.append((iv, c.literals()))
        if not changed:
            break
    if not simple.ok:
        return None
    return Disjunct(simple.literals(),
                    tuple(sorted(parts, key=lambda kv: kv[0].assignments)))
