"""Counterfactual probabilities from observational quantities only.

Everything here reads a :class:`FrequencyTable`, a joint distribution over
observed variables.  The exact table comes from the chain rule of a CBN;
an empirical one comes from counting rows of a :class:`Dataset`.  No
function in this module looks at a cpt directly: every factor is an
intervention-free (conditional) probability looked up in the table.

PN/PS/PNS use the parent-setting sum when the effect's other parents are
not downstream of the cause; otherwise (a mediated second path) they fall
back to the general expansion, which handles any formula.
"""

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .data import Dataset
from .errors import QueryError, UndefinedConditional
from .formula import (DEFAULT_LITERAL_CAP, And, Event, Formula, conj, do, parse,
                      simplify_disjunct, to_canonical_dnf, variables)
from .model import CBN, joint_distribution

PN, PS, PNS = "pn", "ps", "pns"


# -- observational tables ------------------------------------------------------

class FrequencyTable:
    """Joint masses over ``columns``; probabilities are masses over the total."""

    def __init__(self, columns, masses):
        self.columns = tuple(columns)
        self.masses = {tuple(k): Fraction(v) for k, v in masses.items() if v}
        self.total = sum(self.masses.values(), Fraction(0))
        if self.total <= 0:
            raise UndefinedConditional("empty frequency table")
        self._pos = {c: i for i, c in enumerate(self.columns)}
        self._marginals = {}

    def require(self, names):
        missing = [n for n in names if n not in self._pos]
        if missing:
            raise QueryError("data has no column for %s (needed by this query)" % ", ".join(missing))

    def marginal(self, names) -> Dict[Tuple[str, ...], Fraction]:
        names = tuple(names)
        hit = self._marginals.get(names)
        if hit is not None:
            return hit
        self.require(names)
        idx = [self._pos[n] for n in names]
        out = {}
        for key, m in self.masses.items():
            k = tuple(key[i] for i in idx)
            out[k] = out.get(k, Fraction(0)) + m
        out = {k: m / self.total for k, m in out.items()}
        self._marginals[names] = out
        return out

    def prob(self, assignment: Dict[str, str]) -> Fraction:
        names = tuple(sorted(assignment))
        return self.marginal(names).get(tuple(assignment[n] for n in names), Fraction(0))

    def cond(self, target: Dict[str, str], given: Dict[str, str]) -> Optional[Fraction]:
        """``P(target | given)``, or ``None`` when ``given`` has no mass."""
        denom = self.prob(given)
        if denom == 0:
            return None
        joint = dict(given)
        for k, v in target.items():
            if joint.get(k, v) != v:
                return Fraction(0)
            joint[k] = v
        return self.prob(joint) / denom


def exact_table(cbn: CBN) -> FrequencyTable:
    return FrequencyTable(cbn.names, joint_distribution(cbn))


def empirical_table(data: Dataset) -> FrequencyTable:
    return FrequencyTable(data.columns, data.counts())


@dataclass(frozen=True)
class Factor:
    """An intervention-free probability ``P(target | given)`` read from a table."""

    target: Tuple[Tuple[str, str], ...]
    given: Tuple[Tuple[str, str], ...] = ()

    def formulas(self) -> Tuple[Formula, Formula]:
        return (conj(*[Event(*p) for p in self.target]) if self.target else And(()),
                conj(*[Event(*p) for p in self.given]) if self.given else And(()))

    def __str__(self):
        t = ", ".join("%s=%s" % p for p in self.target) or "true"
        if not self.given:
            return "P(%s)" % t
        return "P(%s | %s)" % (t, ", ".join("%s=%s" % p for p in self.given))


class _Missing(Exception):
    """An undefined conditional met on a term with positive weight."""


class _Reader:
    """Table access that records factors and handles undefined conditionals."""

    def __init__(self, table: FrequencyTable, strict: bool, record: bool):
        self.table = table
        self.strict = strict
        self.factors = set() if record else None
        self.skipped: List[str] = []

    def joint(self, names):
        if self.factors is not None:
            self.factors.add(Factor(tuple((n, "*") for n in names)))
        return self.table.marginal(names)

    def prob(self, assignment):
        if self.factors is not None:
            self.factors.add(Factor(tuple(sorted(assignment.items()))))
        return self.table.prob(assignment)

    def cond(self, target, given):
        if self.factors is not None:
            self.factors.add(Factor(tuple(sorted(target.items())), tuple(sorted(given.items()))))
        p = self.table.cond(target, given)
        if p is None:
            what = "P(%s | %s) undefined: no mass on %s" % (
                ", ".join("%s=%s" % kv for kv in sorted(target.items())),
                ", ".join("%s=%s" % kv for kv in sorted(given.items())),
                ", ".join("%s=%s" % kv for kv in sorted(given.items())))
            if self.strict:
                raise UndefinedConditional(what)
            raise _Missing(what)
        return p


# -- general expansion ----------------------------------------------------------

@dataclass
class Expansion:
    value: Fraction
    n_terms: int = 0
    skipped_terms: List[str] = field(default_factory=list)
    factors: Tuple[Factor, ...] = ()
    disjuncts: int = 0


def _satisfies(lits, values):
    for lit in lits:
        if (values[lit.var] == lit.value) != lit.positive:
            return False
    return True


def _expand_disjunct(d, cbn: CBN, reader: _Reader, out: Expansion):
    simple_vars = {lit.var for lit in d.simple}
    worlds = []
    for iv, body in d.parts:
        targets = {lit.var for lit in body}
        reach = set()
        for name in iv.names:
            reach |= cbn.descendants(name)
        upstream = set(targets)
        for t in targets:
            upstream |= cbn.ancestors(t)
        moved = [v for v in cbn.order if v in reach and v not in iv and v in upstream]
        worlds.append((iv, body, moved))
    needed = set(simple_vars)
    for iv, body, moved in worlds:
        for v in moved:
            needed.add(v)
            needed.update(cbn.parents(v))
    r_names = tuple(v for v in cbn.order if v in needed)
    total = Fraction(0)
    for c_r, p in sorted(reader.joint(r_names).items()):
        if p == 0:
            continue
        actual = dict(zip(r_names, c_r))
        if not _satisfies(d.simple, actual):
            continue
        try:
            total += p * _inner(cbn, reader, actual, worlds, out)
        except _Missing as exc:
            out.skipped_terms.append("%s at %s" % (exc, ", ".join("%s=%s" % kv for kv in actual.items())))
    return total


def _inner(cbn, reader, actual, worlds, out):
    # slots already fixed by the actual world: (X, actual parent setting) -> actual X
    fixed = {}
    for _, _, moved in worlds:
        for v in moved:
            fixed[(v, tuple(actual[q] for q in cbn.parents(v)))] = actual[v]
    tasks = [(j, v) for j, (_, _, moved) in enumerate(worlds) for v in moved]
    values = [dict() for _ in worlds]

    def world_value(j, name):
        iv = worlds[j][0]
        if name in iv:
            return iv.mapping[name]
        if name in values[j]:
            return values[j][name]
        return actual[name]

    def step(k, slots, weight):
        if k == len(tasks):
            for j, (iv, body, _) in enumerate(worlds):
                for lit in body:
                    if (world_value(j, lit.var) == lit.value) != lit.positive:
                        return Fraction(0)
            out.n_terms += 1
            return weight
        j, name = tasks[k]
        parents = cbn.parents(name)
        setting = tuple(world_value(j, q) for q in parents)
        slot = (name, setting)
        if slot in slots:
            values[j][name] = slots[slot]
            acc = step(k + 1, slots, weight)
            del values[j][name]
            return acc
        acc = Fraction(0)
        given = dict(zip(parents, setting))
        for v in cbn.domain(name):
            q = reader.cond({name: v}, given)
            if q == 0:
                continue
            values[j][name] = v
            slots[slot] = v
            acc += step(k + 1, slots, weight * q)
            del slots[slot]
            del values[j][name]
        return acc

    return step(0, dict(fixed), Fraction(1))


def expand(cbn: CBN, f, table: FrequencyTable = None, strict=True, record=False,
           cap=DEFAULT_LITERAL_CAP) -> Expansion:
    """Evaluate ``f`` disjunct by disjunct from observational quantities."""
    cbn.require_valid()
    for name in variables(f):
        cbn.variable(name)
    table = table if table is not None else exact_table(cbn)
    reader = _Reader(table, strict, record)
    out = Expansion(Fraction(0))
    for d in to_canonical_dnf(f, cbn, max_literals=cap):
        s = simplify_disjunct(d, cbn)
        if s is None:
            continue
        out.disjuncts += 1
        out.value += _expand_disjunct(s, cbn, reader, out)
    if reader.factors is not None:
        out.factors = tuple(sorted(reader.factors, key=lambda x: (x.target, x.given)))
    return out


def evaluate_observational(cbn: CBN, f, table: FrequencyTable = None, cap=DEFAULT_LITERAL_CAP) -> Fraction:
    """Exact ``Pr(f)`` using only intervention-free probabilities of ``cbn``."""
    return expand(cbn, f, table, strict=True, cap=cap).value


# -- PN / PS / PNS ---------------------------------------------------------------

@dataclass(frozen=True)
class CounterfactualQuery:
    kind: str
    cause: str
    effect: str

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in (PN, PS, PNS):
            raise QueryError("query kind must be pn, ps or pns, not %r" % self.kind)
        object.__setattr__(self, "kind", kind)

    @property
    def target(self) -> Formula:
        x, y = self.cause, self.effect
        if self.kind == PN:
            return do({x: "0"}, Event(y, "0"))
        if self.kind == PS:
            return do({x: "1"}, Event(y, "1"))
        return And((do({x: "1"}, Event(y, "1")), do({x: "0"}, Event(y, "0"))))

    @property
    def condition(self) -> Optional[Formula]:
        x, y = self.cause, self.effect
        if self.kind == PN:
            return And((Event(x, "1"), Event(y, "1")))
        if self.kind == PS:
            return And((Event(x, "0"), Event(y, "0")))
        return None

    def __str__(self):
        return "%s(%s -> %s)" % (self.kind.upper(), self.cause, self.effect)


def check_query(cbn: CBN, cause, effect):
    for v in (cause, effect):
        cbn.variable(v)
        if set(cbn.domain(v)) != {"0", "1"}:
            raise QueryError("%s must be binary with values 0 and 1" % v)
    if cause not in cbn.parents(effect):
        raise QueryError("%s is not a child of %s; evaluate the formula directly with "
                         "`eval` (the general expansion covers this case)" % (effect, cause))


def other_parents(cbn: CBN, cause, effect):
    return tuple(p for p in cbn.parents(effect) if p != cause)


def mediated(cbn: CBN, cause, effect) -> bool:
    """True when another parent of ``effect`` lies downstream of ``cause``."""
    return any(p in cbn.descendants(cause) for p in other_parents(cbn, cause, effect))


@dataclass(frozen=True)
class ParentSettingSum:
    """``sum_c P(others=c | observed) * P(effect=target | cause=forced, others=c)``."""

    others: Tuple[str, ...]
    terms: Tuple[Tuple[Tuple[str, ...], Fraction, Optional[Fraction]], ...]

    @property
    def value(self) -> Fraction:
        return sum((w * q for _, w, q in self.terms if w and q is not None), Fraction(0))


def _setting_sum(cbn, reader, cause, effect, x_obs, y_obs, x_new, y_new, out=None) -> ParentSettingSum:
    others = other_parents(cbn, cause, effect)
    observed = {cause: x_obs, effect: y_obs}
    if reader.prob(observed) == 0:
        raise UndefinedConditional("P(%s=%s, %s=%s) = 0" % (cause, x_obs, effect, y_obs))
    terms = []
    for c in itertools.product(*(cbn.domain(p) for p in others)):
        setting = dict(zip(others, c))
        w = reader.cond(setting, observed)
        q = None
        if w:
            try:
                q = reader.cond({effect: y_new}, dict(setting, **{cause: x_new}))
            except _Missing as exc:
                if out is not None:
                    out.skipped_terms.append(str(exc))
        terms.append((c, w, q))
    return ParentSettingSum(others, tuple(terms))


def _conditional(cbn, reader, table, query: CounterfactualQuery, out: Expansion) -> Fraction:
    x, y = query.cause, query.effect
    if query.kind == PNS:
        total = Fraction(0)
        for kind, (xv, yv) in ((PS, ("0", "0")), (PN, ("1", "1"))):
            w = reader.prob({x: xv, y: yv})
            if w:
                total += w * _conditional(cbn, reader, table, CounterfactualQuery(kind, x, y), out)
        return total
    # PS conditions on X=0, Y=0 and forces X<-1 aiming at Y=1; PN the reverse
    observed, forced = ("0", "1") if query.kind == PS else ("1", "0")
    if not mediated(cbn, x, y):
        s = _setting_sum(cbn, reader, x, y, observed, observed, forced, forced, out)
        out.n_terms += sum(1 for _, w, q in s.terms if w and q is not None)
        return s.value
    numerator = _expand_into(cbn, And((query.condition, query.target)), reader, out)
    return numerator / reader.prob({x: observed, y: observed})


def _expand_into(cbn, f, reader, out):
    total = Fraction(0)
    for d in to_canonical_dnf(f, cbn):
        s = simplify_disjunct(d, cbn)
        if s is not None:
            total += _expand_disjunct(s, cbn, reader, out)
    return total


def query_value(cbn: CBN, query: CounterfactualQuery, table: FrequencyTable = None,
                strict=True, record=False) -> Expansion:
    check_query(cbn, query.cause, query.effect)
    table = table if table is not None else exact_table(cbn)
    reader = _Reader(table, strict, record)
    out = Expansion(Fraction(0))
    if query.kind != PNS:
        observed = {query.cause: "0", query.effect: "0"} if query.kind == PS \
            else {query.cause: "1", query.effect: "1"}
        if reader.prob(observed) == 0:
            raise UndefinedConditional("%s needs P(%s) > 0" % (
                query, " & ".join("%s=%s" % kv for kv in observed.items())))
    out.value = _conditional(cbn, reader, table, query, out)
    if reader.factors is not None:
        out.factors = tuple(sorted(reader.factors, key=lambda x: (x.target, x.given)))
    return out


def ps_exact(cbn: CBN, cause, effect, table: FrequencyTable = None) -> Fraction:
    return query_value(cbn, CounterfactualQuery(PS, cause, effect), table).value


def pn_exact(cbn: CBN, cause, effect, table: FrequencyTable = None) -> Fraction:
    return query_value(cbn, CounterfactualQuery(PN, cause, effect), table).value


def pns_exact(cbn: CBN, cause, effect, table: FrequencyTable = None) -> Fraction:
    return query_value(cbn, CounterfactualQuery(PNS, cause, effect), table).value


def setting_sum(cbn: CBN, kind, cause, effect, table: FrequencyTable = None) -> ParentSettingSum:
    """The raw parent-setting sum for PS or PN, whether or not a mediator invalidates it."""
    check_query(cbn, cause, effect)
    reader = _Reader(table if table is not None else exact_table(cbn), True, False)
    if kind == PS:
        return _setting_sum(cbn, reader, cause, effect, "0", "0", "1", "1")
    if kind == PN:
        return _setting_sum(cbn, reader, cause, effect, "1", "1", "0", "0")
    raise QueryError("setting sums exist for pn and ps only")


# -- estimation -------------------------------------------------------------------

@dataclass
class Estimate:
    query: str
    estimate: Optional[Fraction]
    stderr: Optional[float]
    n_terms: int
    skipped_terms: List[str]
    replicates: int = 0
    failed_replicates: int = 0


Target = Union[Formula, CounterfactualQuery, str]


def _point(cbn, target, given, table, strict):
    if isinstance(target, CounterfactualQuery):
        return query_value(cbn, target, table, strict=strict)
    if given is None:
        return expand(cbn, target, table, strict=strict)
    reader = _Reader(table, strict, False)
    out = Expansion(Fraction(0))
    denom = _expand_into(cbn, given, reader, out)
    if denom == 0:
        raise UndefinedConditional("conditioning event %s has no mass" % (given,))
    out.value = _expand_into(cbn, And((target, given)), reader, out) / denom
    return out


def estimate_observational(data: Dataset, cbn: CBN, target: Target, given=None,
                           n_boot=200, seed=0) -> Estimate:
    """Plug-in estimate from row frequencies with a bootstrap standard error.

    ``cbn`` only contributes its graph and domains.  Undefined conditionals
    are reported in ``skipped_terms``; those terms are left out of the sum.
    """
    if isinstance(target, str):
        target = parse(target, cbn)
    if isinstance(given, str):
        given = parse(given, cbn)
    data.check_domains(cbn)
    table = empirical_table(data)
    point = _point(cbn, target, given, table, strict=False)
    label = str(target) if given is None else "%s | %s" % (target, given)
    result = Estimate(label, point.value, None, point.n_terms, list(point.skipped_terms))
    if n_boot <= 0:
        return result
    counts = data.counts()
    patterns = list(counts)
    mass = np.array([float(counts[k]) for k in patterns])
    n_rows = len(data.rows)
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(n_boot):
        draw = rng.multinomial(n_rows, mass / mass.sum())
        masses = {patterns[i]: int(k) for i, k in enumerate(draw) if k}
        try:
            rep = _point(cbn, target, given, FrequencyTable(data.columns, masses), strict=False)
        except UndefinedConditional:
            result.failed_replicates += 1
            continue
        if rep.skipped_terms:
            result.failed_replicates += 1
            continue
        values.append(float(rep.value))
    result.replicates = len(values)
    if len(values) >= 2:
        result.stderr = float(np.std(values, ddof=1))
    return result
