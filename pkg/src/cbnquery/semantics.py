"""Probabilities of causal formulas via complete combinations of conditional events.

A *slot* is one family of a cpt: a variable together with a full setting
of its parents.  Choosing one value for every slot (a ccce) fixes the
outcome of every mechanism under every intervention, so it decides every
formula.  The probability of a formula is the total weight of the
selections that make it true, weights being products of cpt entries.

For formulas without exogenous symbols it is enough to fix the context
first and only select slots whose exogenous parents agree with it
(an fccce).

``probability`` defaults to a pruned evaluation that branches on a slot
only when the formula actually reads it; slots never read sum out to 1.
``prune=False`` runs the explicit enumeration instead.
"""

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterator, Tuple

from .errors import CapExceeded, FormulaError, UndefinedConditional
from .formula import And, Do, Event, Not, Or, is_simple, variables
from .model import CBN, EMPTY, InterventionSet, joint_distribution

DEFAULT_CAP = 2 ** 24

# slot standing for the whole exogenous context when a joint table is used
CONTEXT = "*context*"

Slot = Tuple[str, Tuple[str, ...]]


@dataclass(frozen=True)
class ConditionalEvent:
    child: str
    child_value: str
    parent_setting: Tuple[Tuple[str, str], ...] = ()

    def __str__(self):
        head = "%s=%s" % (self.child, self.child_value)
        if not self.parent_setting:
            return head
        return head + "|" + ",".join("%s=%s" % pv for pv in self.parent_setting)


@dataclass(frozen=True)
class Selection:
    """One value per slot; ``choices`` is a tuple of ``(slot, value)`` pairs."""

    choices: Tuple[Tuple[Slot, object], ...]

    @cached_property
    def mapping(self) -> Dict[Slot, object]:
        return dict(self.choices)

    def events(self, cbn: CBN) -> Iterator[ConditionalEvent]:
        for (var, setting), value in self.choices:
            if var == CONTEXT:
                for u, x in zip(cbn.exogenous, value):
                    yield ConditionalEvent(u, x)
            else:
                yield ConditionalEvent(var, value, tuple(zip(cbn.parents(var), setting)))

    def __len__(self):
        return len(self.choices)


class Ccce(Selection):
    pass


class Fccce(Selection):
    pass


def format_selection(sel: Selection, cbn: CBN) -> str:
    """One-line trace form, e.g. ``U=0; X=0|U=0; Y=1|X=1``."""
    return "; ".join(str(e) for e in sel.events(cbn))


# -- slots -------------------------------------------------------------

def slots(cbn: CBN):
    """Every slot of ``cbn`` in topological order."""
    out = []
    joint = cbn.context_table is not None
    if joint and cbn.exogenous:
        out.append((CONTEXT, ()))
    for name in cbn.order:
        if joint and cbn.is_exogenous(name):
            continue
        for setting in cbn.parent_settings(name):
            out.append((name, setting))
    return out


def slot_support(cbn: CBN, slot, skip_zero=True):
    """``(value, probability)`` pairs a slot can take."""
    var, setting = slot
    if var == CONTEXT:
        items = cbn.context_distribution().items()
    else:
        row = cbn.cpts[var].rows[setting]
        items = [(v, row.get(v, Fraction(0))) for v in cbn.domain(var)]
    return [(v, p) for v, p in items if p > 0 or not skip_zero]


def _count(supports):
    n = 1
    for s in supports:
        n *= len(s)
    return n


def count_ccces(cbn: CBN, skip_zero=False):
    return _count(slot_support(cbn, s, skip_zero) for s in slots(cbn))


def count_fccces(cbn: CBN, skip_zero=False):
    total = 0
    for ctx, p in _contexts(cbn, skip_zero):
        total += _count(slot_support(cbn, s, skip_zero) for s in _context_slots(cbn, ctx))
    return total


def _contexts(cbn, skip_zero):
    for ctx, p in cbn.context_distribution().items():
        if p > 0 or not skip_zero:
            yield ctx, p


def _context_slots(cbn, ctx):
    fixed = dict(zip(cbn.exogenous, ctx))
    out = []
    for name in cbn.order:
        if cbn.is_exogenous(name):
            continue
        parents = cbn.parents(name)
        for setting in cbn.parent_settings(name):
            if all(fixed.get(p, x) == x for p, x in zip(parents, setting)):
                out.append((name, setting))
    return out


def _context_choices(cbn, ctx):
    if cbn.context_table is not None:
        return [((CONTEXT, ()), ctx)] if cbn.exogenous else []
    return [((u, ()), x) for u, x in zip(cbn.exogenous, ctx)]


def enumerate_ccces(cbn: CBN, cap=DEFAULT_CAP, skip_zero=True) -> Iterator[Tuple[Ccce, Fraction]]:
    """Yield every ccce with its probability (lazily)."""
    cbn.require_valid()
    all_slots = slots(cbn)
    supports = [slot_support(cbn, s, skip_zero) for s in all_slots]
    n = _count(supports)
    if n > cap:
        raise CapExceeded("%d ccces exceed the cap of %d" % (n, cap))
    for combo in itertools.product(*supports):
        p = Fraction(1)
        for _, q in combo:
            p *= q
        yield Ccce(tuple((s, v) for s, (v, _) in zip(all_slots, combo))), p


def enumerate_fccces(cbn: CBN, cap=DEFAULT_CAP, skip_zero=True) -> Iterator[Tuple[Fccce, Fraction]]:
    """Yield every fixed-context ccce with its probability (lazily)."""
    cbn.require_valid()
    n = count_fccces(cbn, skip_zero)
    if n > cap:
        raise CapExceeded("%d fccces exceed the cap of %d" % (n, cap))
    for ctx, pc in _contexts(cbn, skip_zero):
        head = _context_choices(cbn, ctx)
        ctx_slots = _context_slots(cbn, ctx)
        supports = [slot_support(cbn, s, skip_zero) for s in ctx_slots]
        for combo in itertools.product(*supports):
            p = pc
            for _, q in combo:
                p *= q
            yield Fccce(tuple(head) + tuple((s, v) for s, (v, _) in zip(ctx_slots, combo))), p


# -- evaluation ----------------------------------------------------------

class _Unassigned(Exception):
    def __init__(self, slot):
        super().__init__(slot)
        self.slot = slot


class _Worlds:
    """Lazily solves variables per intervention set from a (partial) slot choice."""

    def __init__(self, cbn, choices, on_missing):
        self.cbn = cbn
        self.choices = choices
        self.on_missing = on_missing
        self.joint = cbn.context_table is not None
        self.memo = {}

    def slot(self, slot):
        try:
            return self.choices[slot]
        except KeyError:
            return self.on_missing(slot)

    def value(self, iv: InterventionSet, var):
        key = (iv, var)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if var in iv:
            out = iv.mapping[var]
        elif self.cbn.is_exogenous(var):
            if self.joint:
                out = self.slot((CONTEXT, ()))[self.cbn.exogenous.index(var)]
            else:
                out = self.slot((var, ()))
        else:
            setting = tuple(self.value(iv, p) for p in self.cbn.parents(var))
            out = self.slot((var, setting))
        self.memo[key] = out
        return out

    def truth(self, f, iv=EMPTY):
        if isinstance(f, Event):
            return self.value(iv, f.var) == f.value
        if isinstance(f, Not):
            return not self.truth(f.arg, iv)
        if isinstance(f, And):
            return all(self.truth(a, iv) for a in f.args)
        if isinstance(f, Or):
            return any(self.truth(a, iv) for a in f.args)
        if isinstance(f, Do):
            if iv:
                raise FormulaError("nested intervention %s inside [%s]" % (f.iv, iv))
            return self.truth(f.body, f.iv)
        raise TypeError("not a formula: %r" % (f,))


def _check_names(cbn, f):
    for name in variables(f):
        cbn.variable(name)


def entails(sel: Selection, f, cbn: CBN) -> bool:
    """Truth of ``f`` under the selection; each intervention set's world is solved once."""
    _check_names(cbn, f)

    def missing(slot):
        raise FormulaError("formula reads %s under a setting outside this fixed context"
                           % _slot_name(cbn, slot))

    return _Worlds(cbn, sel.mapping, missing).truth(f)


def _slot_name(cbn, slot):
    var, setting = slot
    if var == CONTEXT:
        return "the exogenous context"
    if not setting:
        return var
    return "%s|%s" % (var, ",".join("%s=%s" % pv for pv in zip(cbn.parents(var), setting)))


def uses_exogenous(cbn: CBN, f) -> bool:
    return any(cbn.is_exogenous(v) for v in variables(f))


def probability(cbn: CBN, f, prune=True, cap=DEFAULT_CAP) -> Fraction:
    """Exact probability of ``f`` in ``cbn``.

    With ``prune=False``, formulas free of exogenous symbols are summed
    over fccces and the rest over ccces.
    """
    cbn.require_valid()
    _check_names(cbn, f)
    if prune:
        return _lazy_probability(cbn, f, cap)
    stream = enumerate_ccces(cbn, cap) if uses_exogenous(cbn, f) else enumerate_fccces(cbn, cap)
    total = Fraction(0)
    for sel, p in stream:
        if entails(sel, f, cbn):
            total += p
    return total


def _raise_unassigned(slot):
    raise _Unassigned(slot)


def _lazy_probability(cbn, f, cap):
    total = Fraction(0)
    stack = [({}, Fraction(1))]
    visited = 0
    supports = {}
    while stack:
        choices, weight = stack.pop()
        visited += 1
        if visited > cap:
            raise CapExceeded("pruned evaluation visited more than %d partial selections" % cap)
        try:
            holds = _Worlds(cbn, choices, _raise_unassigned).truth(f)
        except _Unassigned as need:
            slot = need.slot
            if slot not in supports:
                supports[slot] = slot_support(cbn, slot)
            for value, p in supports[slot]:
                nxt = dict(choices)
                nxt[slot] = value
                stack.append((nxt, weight * p))
            continue
        if holds:
            total += weight
    return total


def entailing(cbn: CBN, f, cap=DEFAULT_CAP):
    """Selections entailing ``f`` (fccces for exogenous-free ``f``, else ccces)."""
    cbn.require_valid()
    _check_names(cbn, f)
    stream = enumerate_ccces(cbn, cap) if uses_exogenous(cbn, f) else enumerate_fccces(cbn, cap)
    for sel, p in stream:
        if entails(sel, f, cbn):
            yield sel, p


def conditional_probability(cbn: CBN, f, given, prune=True, cap=DEFAULT_CAP) -> Fraction:
    """``Pr(f & given) / Pr(given)``; raises :class:`UndefinedConditional` if ``Pr(given) = 0``."""
    denom = probability(cbn, given, prune, cap)
    if denom == 0:
        raise UndefinedConditional("conditioning event %s has probability 0" % (given,))
    return probability(cbn, And((f, given)), prune, cap) / denom


def forward_probability(cbn: CBN, f) -> Fraction:
    """Intervention-free ``f`` by summing the chain-rule joint (no selections involved)."""
    if not is_simple(f):
        raise FormulaError("forward inference needs an intervention-free formula")
    names = cbn.names
    total = Fraction(0)
    for key, p in joint_distribution(cbn).items():
        values = dict(zip(names, key))
        if _simple_truth(f, values):
            total += p
    return total


def _simple_truth(f, values):
    if isinstance(f, Event):
        return values[f.var] == f.value
    if isinstance(f, Not):
        return not _simple_truth(f.arg, values)
    if isinstance(f, And):
        return all(_simple_truth(a, values) for a in f.args)
    if isinstance(f, Or):
        return any(_simple_truth(a, values) for a in f.args)
    raise TypeError("not an intervention-free formula: %r" % (f,))
