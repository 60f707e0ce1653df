"""Recursive causal Bayesian networks with exact rational cpts.

A :class:`CBN` is a signature (exogenous and endogenous variables with
finite domains) plus one :class:`Cpt` per variable.  Domain values are
strings; probabilities are :class:`fractions.Fraction` everywhere.

Exogenous variables are independent by default.  Passing a
``context_table`` instead gives a single joint distribution over full
exogenous assignments, in which case exogenous variables carry no cpts.
"""

import heapq
import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, Mapping, Optional, Tuple

from .errors import ModelError

EXOGENOUS = "exogenous"
ENDOGENOUS = "endogenous"

FORMAT = "cbn/1"

Setting = Tuple[str, ...]


def parse_probability(raw):
    """Read a probability exactly from ``"p/q"``, a decimal string or a number."""
    if isinstance(raw, Fraction):
        return raw
    if isinstance(raw, bool):
        raise ModelError("probability must be numeric, got %r" % (raw,))
    if isinstance(raw, int):
        return Fraction(raw)
    if isinstance(raw, float):
        # str() keeps the literal the user wrote, not the binary expansion
        return Fraction(str(raw))
    try:
        return Fraction(str(raw).strip())
    except (ValueError, ZeroDivisionError):
        raise ModelError("cannot read probability %r" % (raw,)) from None


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    domain: Tuple[str, ...]

    def __post_init__(self):
        if self.kind not in (EXOGENOUS, ENDOGENOUS):
            raise ModelError("variable %s: kind must be exogenous or endogenous" % self.name)
        object.__setattr__(self, "domain", tuple(str(v) for v in self.domain))

    @property
    def exogenous(self):
        return self.kind == EXOGENOUS


@dataclass(frozen=True)
class Cpt:
    """Conditional probability table for ``child`` given ``parents``.

    ``rows`` maps a parent setting (a tuple of values in ``parents`` order)
    to a distribution over the child's domain.
    """

    child: str
    parents: Tuple[str, ...]
    rows: Mapping[Setting, Mapping[str, Fraction]]

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        rows = {}
        for setting, dist in self.rows.items():
            key = tuple(str(v) for v in setting)
            rows[key] = {str(v): parse_probability(p) for v, p in dist.items()}
        object.__setattr__(self, "rows", rows)

    def prob(self, value, setting=()):
        row = self.rows.get(tuple(setting))
        if row is None:
            raise ModelError("cpt for %s has no row for %r" % (self.child, setting))
        return row.get(value, Fraction(0))


@dataclass(frozen=True)
class InterventionSet:
    """Assignments ``[V1<-v1, ...]`` kept sorted by variable name."""

    assignments: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        seen = {}
        for name, value in self.assignments:
            value = str(value)
            if name in seen and seen[name] != value:
                raise ModelError("variable %s intervened on twice (%s, %s)"
                                 % (name, seen[name], value))
            seen[name] = value
        object.__setattr__(self, "assignments", tuple(sorted(seen.items())))

    @classmethod
    def of(cls, mapping=None, **kwargs):
        pairs = list((mapping or {}).items()) + list(kwargs.items())
        return cls(tuple(pairs))

    @cached_property
    def mapping(self) -> Dict[str, str]:
        return dict(self.assignments)

    @property
    def names(self):
        return tuple(name for name, _ in self.assignments)

    def without(self, names):
        names = set(names)
        return InterventionSet(tuple(a for a in self.assignments if a[0] not in names))

    def __contains__(self, name):
        return name in self.mapping

    def __len__(self):
        return len(self.assignments)

    def __bool__(self):
        return bool(self.assignments)

    def __lt__(self, other):
        return self.assignments < other.assignments

    def __str__(self):
        return ", ".join("%s<-%s" % a for a in self.assignments)


EMPTY = InterventionSet()


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[str, ...] = ()

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "valid"
        return "\n".join(self.violations)


@dataclass(frozen=True)
class CBN:
    variables: Tuple[Variable, ...]
    cpts: Mapping[str, Cpt]
    context_table: Optional[Mapping[Setting, Fraction]] = None
    _index: Dict[str, Variable] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        cpts = self.cpts
        if not isinstance(cpts, Mapping):
            cpts = {c.child: c for c in cpts}
        object.__setattr__(self, "cpts", dict(cpts))
        if self.context_table is not None:
            table = {tuple(str(v) for v in k): parse_probability(p)
                     for k, p in self.context_table.items()}
            object.__setattr__(self, "context_table", table)
        object.__setattr__(self, "_index", {v.name: v for v in self.variables})

    # -- signature -----------------------------------------------------

    @property
    def names(self):
        return tuple(v.name for v in self.variables)

    @cached_property
    def exogenous(self):
        return tuple(v.name for v in self.variables if v.exogenous)

    @cached_property
    def endogenous(self):
        return tuple(v.name for v in self.variables if not v.exogenous)

    def variable(self, name) -> Variable:
        try:
            return self._index[name]
        except KeyError:
            raise ModelError("unknown variable %r" % (name,)) from None

    def domain(self, name):
        return self.variable(name).domain

    def is_exogenous(self, name):
        return self.variable(name).exogenous

    def parents(self, name):
        cpt = self.cpts.get(name)
        return cpt.parents if cpt is not None else ()

    def parent_settings(self, name):
        """All parent settings of ``name`` in lexicographic product order."""
        return list(itertools.product(*(self.domain(p) for p in self.parents(name))))

    @cached_property
    def children(self):
        kids = {n: [] for n in self.names}
        for name in self.names:
            for p in self.parents(name):
                if p in kids:
                    kids[p].append(name)
        return {n: tuple(c) for n, c in kids.items()}

    @cached_property
    def order(self):
        return topological_order(self)

    @cached_property
    def _descendants(self):
        out = {}
        for name in reversed(self.order):
            acc = set()
            for c in self.children[name]:
                acc.add(c)
                acc |= out[c]
            out[name] = frozenset(acc)
        return out

    @cached_property
    def _ancestors(self):
        out = {}
        for name in self.order:
            acc = set()
            for p in self.parents(name):
                acc.add(p)
                acc |= out[p]
            out[name] = frozenset(acc)
        return out

    def descendants(self, name):
        """Strict descendants of ``name``."""
        return self._descendants[name]

    def ancestors(self, name):
        """Strict ancestors of ``name``."""
        return self._ancestors[name]

    def context_distribution(self):
        """Distribution over full exogenous assignments, in ``exogenous`` order."""
        if self.context_table is not None:
            return dict(self.context_table)
        dist = {}
        doms = [self.domain(u) for u in self.exogenous]
        for ctx in itertools.product(*doms):
            p = Fraction(1)
            for u, val in zip(self.exogenous, ctx):
                p *= self.cpts[u].prob(val)
            dist[ctx] = p
        return dist

    @cached_property
    def report(self):
        return validate(self)

    def require_valid(self):
        if not self.report.ok:
            raise ModelError("invalid model:\n" + str(self.report))
        return self


def validate(cbn: CBN) -> ValidationReport:
    problems = []
    seen = set()
    for v in cbn.variables:
        if v.name in seen:
            problems.append("duplicate variable %s" % v.name)
        seen.add(v.name)
        if not v.domain:
            problems.append("variable %s has an empty domain" % v.name)
        if len(set(v.domain)) != len(v.domain):
            problems.append("variable %s has repeated domain values" % v.name)

    for child in cbn.cpts:
        if child not in seen:
            problems.append("cpt for undeclared variable %s" % child)

    joint = cbn.context_table is not None
    for v in cbn.variables:
        cpt = cbn.cpts.get(v.name)
        if v.exogenous and joint:
            if cpt is not None:
                problems.append("exogenous %s has a cpt alongside the joint context table" % v.name)
            continue
        if cpt is None:
            problems.append("missing cpt for %s" % v.name)
            continue
        unknown = [p for p in cpt.parents if p not in seen]
        for p in unknown:
            problems.append("cpt for %s: unknown parent %s" % (v.name, p))
        if len(set(cpt.parents)) != len(cpt.parents):
            problems.append("cpt for %s: repeated parent" % v.name)
        if v.exogenous and cpt.parents:
            problems.append("exogenous %s has parents" % v.name)
        if unknown:
            continue
        expected = set(itertools.product(*(cbn.domain(p) for p in cpt.parents)))
        for setting in sorted(expected - set(cpt.rows)):
            problems.append("cpt for %s: missing row %s" % (v.name, _fmt_setting(cpt.parents, setting)))
        for setting in sorted(set(cpt.rows) - expected):
            problems.append("cpt for %s: unexpected row %r" % (v.name, setting))
        for setting in sorted(expected & set(cpt.rows)):
            problems.extend(_check_dist(
                "cpt for %s, row %s" % (v.name, _fmt_setting(cpt.parents, setting)),
                cpt.rows[setting], v.domain))

    if joint:
        doms = [cbn.domain(u) for u in cbn.exogenous]
        total = Fraction(0)
        for ctx, p in cbn.context_table.items():
            if len(ctx) != len(doms) or any(x not in d for x, d in zip(ctx, doms)):
                problems.append("context table: bad context %r" % (ctx,))
            if p < 0:
                problems.append("context table: negative probability for %r" % (ctx,))
            total += p
        if total != 1:
            problems.append("context table: row sum %s != 1" % total)

    try:
        topological_order(cbn)
    except ModelError:
        problems.append("cycle in parent graph")
    return ValidationReport(tuple(problems))


def _fmt_setting(parents, setting):
    if not parents:
        return "()"
    return ", ".join("%s=%s" % pv for pv in zip(parents, setting))


def _check_dist(where, dist, domain):
    out = []
    for value, p in dist.items():
        if value not in domain:
            out.append("%s: value %s outside domain" % (where, value))
        if p < 0:
            out.append("%s: negative probability" % where)
    total = sum(dist.values(), Fraction(0))
    if total != 1:
        out.append("%s: row sum %s != 1" % (where, total))
    return out


def topological_order(cbn: CBN):
    """Parents before children; ties go to the earlier-declared variable."""
    position = {name: i for i, name in enumerate(cbn.names)}
    pending = {name: len([p for p in cbn.parents(name) if p in position]) for name in cbn.names}
    kids = {name: [] for name in cbn.names}
    for name in cbn.names:
        for p in cbn.parents(name):
            if p in kids:
                kids[p].append(name)
    ready = [position[n] for n, k in pending.items() if k == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        name = cbn.names[heapq.heappop(ready)]
        order.append(name)
        for c in kids[name]:
            pending[c] -= 1
            if pending[c] == 0:
                heapq.heappush(ready, position[c])
    if len(order) != len(cbn.names):
        raise ModelError("cycle detected among %s" % sorted(set(cbn.names) - set(order)))
    return tuple(order)


def point_mass(name, domain, value):
    return Cpt(name, (), {(): {v: Fraction(int(v == value)) for v in domain}})


def intervene(cbn: CBN, iv) -> CBN:
    """Return ``cbn`` with each intervened variable made parentless and fixed."""
    if not isinstance(iv, InterventionSet):
        iv = InterventionSet.of(iv)
    for name, value in iv.assignments:
        if value not in cbn.domain(name):
            raise ModelError("value %s outside the domain of %s" % (value, name))
    cpts = dict(cbn.cpts)
    table = cbn.context_table
    for name, value in iv.assignments:
        if cbn.is_exogenous(name) and table is not None:
            k = cbn.exogenous.index(name)
            moved = {}
            for ctx, p in table.items():
                key = ctx[:k] + (value,) + ctx[k + 1:]
                moved[key] = moved.get(key, Fraction(0)) + p
            table = moved
        else:
            cpts[name] = point_mass(name, cbn.domain(name), value)
    return CBN(cbn.variables, cpts, table)


def joint_distribution(cbn: CBN):
    """Chain-rule joint over all variables, keyed by value tuples in ``cbn.names`` order.

    Only positive-probability assignments are kept.
    """
    cbn.require_valid()
    names = cbn.names
    pos = {n: i for i, n in enumerate(names)}
    order = [n for n in cbn.order if not cbn.is_exogenous(n)]
    out = {}
    for ctx, pc in cbn.context_distribution().items():
        if pc == 0:
            continue
        start = dict(zip(cbn.exogenous, ctx))
        stack = [(start, 0, pc)]
        while stack:
            values, i, p = stack.pop()
            if i == len(order):
                key = [None] * len(names)
                for n, v in values.items():
                    key[pos[n]] = v
                out[tuple(key)] = out.get(tuple(key), Fraction(0)) + p
                continue
            name = order[i]
            cpt = cbn.cpts[name]
            row = cpt.rows[tuple(values[q] for q in cpt.parents)]
            for v in cbn.domain(name):
                q = row.get(v, 0)
                if q:
                    nxt = dict(values)
                    nxt[name] = v
                    stack.append((nxt, i + 1, p * q))
    return out


# -- construction helpers ----------------------------------------------

def binary_cpt(child, parents, p_zero):
    """Cpt over domain ``("0", "1")`` from ``P(child=0 | setting)``.

    ``p_zero`` is a mapping from settings to probabilities, or a single
    probability when ``parents`` is empty.
    """
    if not isinstance(p_zero, Mapping):
        p_zero = {(): p_zero}
    rows = {}
    for setting, p in p_zero.items():
        if not isinstance(setting, tuple):
            setting = (setting,)
        p = parse_probability(p)
        rows[tuple(str(s) for s in setting)] = {"0": p, "1": 1 - p}
    return Cpt(child, tuple(parents), rows)


def binary(name, kind=ENDOGENOUS):
    return Variable(name, kind, ("0", "1"))


# -- JSON --------------------------------------------------------------

def _fmt_prob(p):
    return str(p)


def cbn_from_dict(doc) -> CBN:
    fmt = doc.get("format", FORMAT)
    if fmt != FORMAT:
        raise ModelError("unsupported model format %r (expected %s)" % (fmt, FORMAT))
    try:
        variables = [Variable(v["name"], v.get("kind", ENDOGENOUS), tuple(v["domain"]))
                     for v in doc["variables"]]
    except KeyError as exc:
        raise ModelError("variable entry missing field %s" % exc) from None
    cpts = {}
    for entry in doc.get("cpts", []):
        child = entry["child"]
        parents = tuple(entry.get("parents", ()))
        rows = {}
        for row in entry.get("rows", []):
            given = row.get("given", {})
            if set(given) != set(parents):
                raise ModelError("cpt for %s: row keys %s do not match parents %s"
                                 % (child, sorted(given), list(parents)))
            rows[tuple(str(given[p]) for p in parents)] = row["dist"]
        if child in cpts:
            raise ModelError("two cpts for %s" % child)
        cpts[child] = Cpt(child, parents, rows)
    table = None
    if "contexts" in doc:
        exo = [v.name for v in variables if v.exogenous]
        table = {}
        for row in doc["contexts"]["rows"]:
            values = row["values"]
            table[tuple(str(values[u]) for u in exo)] = row["p"]
    return CBN(tuple(variables), cpts, table)


def cbn_to_dict(cbn: CBN):
    doc = {
        "format": FORMAT,
        "variables": [{"name": v.name, "kind": v.kind, "domain": list(v.domain)}
                      for v in cbn.variables],
        "cpts": [],
    }
    for v in cbn.variables:
        cpt = cbn.cpts.get(v.name)
        if cpt is None:
            continue
        rows = [{"given": dict(zip(cpt.parents, setting)),
                 "dist": {val: _fmt_prob(p) for val, p in dist.items()}}
                for setting, dist in cpt.rows.items()]
        doc["cpts"].append({"child": cpt.child, "parents": list(cpt.parents), "rows": rows})
    if cbn.context_table is not None:
        doc["contexts"] = {"rows": [
            {"values": dict(zip(cbn.exogenous, ctx)), "p": _fmt_prob(p)}
            for ctx, p in cbn.context_table.items()]}
    return doc


def load_cbn(path) -> CBN:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError("%s: not valid JSON (%s)" % (path, exc)) from None
    return cbn_from_dict(doc)


def dump_cbn(cbn: CBN, path):
    with open(path, "w") as fh:
        json.dump(cbn_to_dict(cbn), fh, indent=2)
        fh.write("\n")
