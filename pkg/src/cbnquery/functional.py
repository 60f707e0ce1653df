"""Compile a CBN into a functional causal model with response-function variables.

Each endogenous variable Y with parents X1..Xn gets an exogenous variable
whose values are total functions from parent settings to R(Y).  A
function is identified by a mixed-radix integer: its output on the first
parent setting is the most significant digit.  The measure over extended
contexts is the product of the original context distribution and, per
variable, ``Pr_Y(f) = prod_s P(Y = f(s) | s)``.
"""

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import lcm
from typing import Dict, Iterator, Tuple

import numpy as np

from .data import Dataset
from .errors import CapExceeded, DataError, FormulaError, UndefinedConditional
from .formula import And, Do, Event, Not, Or, variables
from .model import CBN, EMPTY, InterventionSet

DEFAULT_CAP = 2 ** 24
SAMPLE_BLOCK = 4096
FORMAT = "fcm/1"


@dataclass(frozen=True)
class ResponseFunction:
    var: str
    parents: Tuple[str, ...]
    settings: Tuple[Tuple[str, ...], ...]
    outputs: Tuple[str, ...]
    index: int

    def __call__(self, setting):
        return self.outputs[self.settings.index(tuple(setting))]

    @property
    def label(self):
        return "f" + "".join(self.outputs) if all(len(o) == 1 for o in self.outputs) \
            else "f[%s]" % ",".join(self.outputs)


@dataclass(frozen=True)
class ExtendedContext:
    """Original exogenous values plus one response function per endogenous variable."""

    exogenous: Tuple[Tuple[str, str], ...]
    functions: Tuple[ResponseFunction, ...]

    @cached_property
    def values(self) -> Dict[str, str]:
        return dict(self.exogenous)

    @cached_property
    def by_var(self) -> Dict[str, ResponseFunction]:
        return {rf.var: rf for rf in self.functions}


@dataclass(frozen=True)
class ProductMeasure:
    contexts: Tuple[Tuple[Tuple[str, ...], Fraction], ...]
    functions: Tuple[Tuple[str, Tuple[Tuple[ResponseFunction, Fraction], ...]], ...]

    def prob(self, ctx: ExtendedContext) -> Fraction:
        ctx_key = tuple(v for _, v in ctx.exogenous)
        p = dict(self.contexts).get(ctx_key, Fraction(0))
        for var, table in self.functions:
            rf = ctx.by_var[var]
            p *= dict((g.index, q) for g, q in table).get(rf.index, Fraction(0))
        return p

    @property
    def size(self):
        n = len(self.contexts)
        for _, table in self.functions:
            n *= len(table)
        return n


@dataclass(frozen=True)
class FunctionalModel:
    source: CBN
    measure: ProductMeasure

    @property
    def exogenous(self):
        return self.source.exogenous

    @property
    def endogenous(self):
        return self.source.endogenous

    def response_variable(self, var):
        return "U_" + var

    def contexts(self) -> Iterator[Tuple[ExtendedContext, Fraction]]:
        tables = [t for _, t in self.measure.functions]
        for ctx, pc in self.measure.contexts:
            exo = tuple(zip(self.exogenous, ctx))
            for combo in itertools.product(*tables):
                p = pc
                for _, q in combo:
                    p *= q
                yield ExtendedContext(exo, tuple(rf for rf, _ in combo)), p

    @cached_property
    def _arrays(self):
        return _Arrays(self)


def _response_function(var, parents, settings, outputs, domain):
    index = 0
    for o in outputs:
        index = index * len(domain) + domain.index(o)
    return ResponseFunction(var, tuple(parents), tuple(settings), tuple(outputs), index)


def response_functions(cbn: CBN, var, skip_zero=True):
    """``(ResponseFunction, Pr_Y(f))`` pairs for ``var`` in index order."""
    parents = cbn.parents(var)
    settings = cbn.parent_settings(var)
    domain = cbn.domain(var)
    cpt = cbn.cpts[var]
    per_setting = []
    for s in settings:
        row = cpt.rows[s]
        per_setting.append([(v, row.get(v, Fraction(0))) for v in domain
                            if row.get(v, Fraction(0)) > 0 or not skip_zero])
    out = []
    for combo in itertools.product(*per_setting):
        p = Fraction(1)
        for _, q in combo:
            p *= q
        outputs = tuple(v for v, _ in combo)
        out.append((_response_function(var, parents, settings, outputs, domain), p))
    return out


def compile(cbn: CBN, cap=DEFAULT_CAP) -> FunctionalModel:
    """Build the i-compatible functional model; zero-measure functions are left out."""
    cbn.require_valid()
    contexts = tuple((ctx, p) for ctx, p in cbn.context_distribution().items() if p > 0)
    size = len(contexts)
    tables = []
    for var in cbn.order:
        if cbn.is_exogenous(var):
            continue
        n = 1
        for s in cbn.parent_settings(var):
            n *= sum(1 for q in cbn.cpts[var].rows[s].values() if q > 0)
        size *= n
        if size > cap:
            raise CapExceeded("functional model has more than %d positive-measure contexts" % cap)
        tables.append((var, tuple(response_functions(cbn, var))))
    return FunctionalModel(cbn, ProductMeasure(contexts, tuple(tables)))


# -- satisfaction ------------------------------------------------------------

def solve(fm: FunctionalModel, ctx: ExtendedContext, iv: InterventionSet = EMPTY) -> Dict[str, str]:
    """Unique solution of the equations under ``iv``; exogenous interventions overwrite ``ctx``."""
    cbn = fm.source
    values = {}
    for var in cbn.order:
        if var in iv:
            values[var] = iv.mapping[var]
        elif cbn.is_exogenous(var):
            values[var] = ctx.values[var]
        else:
            rf = ctx.by_var[var]
            values[var] = rf(tuple(values[p] for p in rf.parents))
    return values


def satisfies(fm: FunctionalModel, ctx: ExtendedContext, f) -> bool:
    worlds = {}

    def world(iv):
        if iv not in worlds:
            worlds[iv] = solve(fm, ctx, iv)
        return worlds[iv]

    def truth(g, iv):
        if isinstance(g, Event):
            return world(iv)[g.var] == g.value
        if isinstance(g, Not):
            return not truth(g.arg, iv)
        if isinstance(g, And):
            return all(truth(a, iv) for a in g.args)
        if isinstance(g, Or):
            return any(truth(a, iv) for a in g.args)
        if isinstance(g, Do):
            if iv:
                raise FormulaError("nested intervention %s inside [%s]" % (g.iv, iv))
            return truth(g.body, g.iv)
        raise TypeError("not a formula: %r" % (g,))

    return truth(f, EMPTY)


# -- exhaustive oracle --------------------------------------------------------

class _Arrays:
    """Every positive-measure extended context laid out as columns of integer codes."""

    def __init__(self, fm: FunctionalModel):
        cbn = fm.source
        self.cbn = cbn
        tables = [t for _, t in fm.measure.functions]
        dims = [len(fm.measure.contexts)] + [len(t) for t in tables]
        grids = np.indices(dims).reshape(len(dims), -1) if dims else np.zeros((0, 1), int)
        self.n = grids.shape[1]
        self.code = {var: {v: i for i, v in enumerate(cbn.domain(var))} for var in cbn.names}
        ctx_codes = np.array([[self.code[u][x] for u, x in zip(cbn.exogenous, ctx)]
                              for ctx, _ in fm.measure.contexts], dtype=np.int64)
        self.exo = {u: ctx_codes[grids[0], k] for k, u in enumerate(cbn.exogenous)}
        self.func = {}
        for k, (var, table) in enumerate(fm.measure.functions):
            outs = np.array([[self.code[var][o] for o in rf.outputs] for rf, _ in table], dtype=np.int64)
            self.func[var] = (grids[k + 1], outs)
        # exact weights over a common denominator
        probs = [[q for _, q in t] for t in tables]
        weights = []
        for idx in range(self.n):
            p = fm.measure.contexts[grids[0, idx]][1]
            for k, col in enumerate(probs):
                p *= col[grids[k + 1, idx]]
            weights.append(p)
        self.den = lcm(*[w.denominator for w in weights]) if weights else 1
        self.num = np.array([w.numerator * (self.den // w.denominator) for w in weights], dtype=object)

    def column(self, iv, var, memo):
        key = (iv, var)
        if key in memo:
            return memo[key]
        cbn = self.cbn
        if var in iv:
            out = np.full(self.n, self.code[var][iv.mapping[var]], dtype=np.int64)
        elif cbn.is_exogenous(var):
            out = self.exo[var]
        else:
            pick, outs = self.func[var]
            setting = np.zeros(self.n, dtype=np.int64)
            for p in cbn.parents(var):
                setting = setting * len(cbn.domain(p)) + self.column(iv, p, memo)
            out = outs[pick, setting]
        memo[key] = out
        return out

    def mask(self, f, iv, memo):
        if isinstance(f, Event):
            code = self.code[f.var].get(f.value)
            if code is None:
                return np.zeros(self.n, dtype=bool)
            return self.column(iv, f.var, memo) == code
        if isinstance(f, Not):
            return ~self.mask(f.arg, iv, memo)
        if isinstance(f, And):
            out = np.ones(self.n, dtype=bool)
            for a in f.args:
                out &= self.mask(a, iv, memo)
            return out
        if isinstance(f, Or):
            out = np.zeros(self.n, dtype=bool)
            for a in f.args:
                out |= self.mask(a, iv, memo)
            return out
        if isinstance(f, Do):
            if iv:
                raise FormulaError("nested intervention %s inside [%s]" % (f.iv, iv))
            return self.mask(f.body, f.iv, memo)
        raise TypeError("not a formula: %r" % (f,))


def oracle_probability(fm: FunctionalModel, f, cap=DEFAULT_CAP) -> Fraction:
    """Exact measure of the extended contexts satisfying ``f``."""
    if fm.measure.size > cap:
        raise CapExceeded("%d extended contexts exceed the cap of %d" % (fm.measure.size, cap))
    for name in variables(f):
        fm.source.variable(name)
    arr = fm._arrays
    hit = arr.mask(f, EMPTY, {})
    return Fraction(int(arr.num[hit].sum()), arr.den)


def oracle_conditional(fm: FunctionalModel, f, given, cap=DEFAULT_CAP) -> Fraction:
    denom = oracle_probability(fm, given, cap)
    if denom == 0:
        raise UndefinedConditional("conditioning event %s has probability 0" % (given,))
    return oracle_probability(fm, And((f, given)), cap) / denom


# -- sampling -----------------------------------------------------------------

def sample(fm: FunctionalModel, n: int, seed: int = 0) -> Dataset:
    """``n`` rows drawn from the product measure, solved without interventions.

    Rows come in fixed blocks; block ``b`` uses its own generator seeded by
    ``(seed, b)``, so any split of the blocks across workers reproduces the
    same dataset.
    """
    if n < 1:
        raise DataError("sample size must be at least 1")
    blocks = [sample_block(fm, seed, b, min(SAMPLE_BLOCK, n - b * SAMPLE_BLOCK))
              for b in range((n + SAMPLE_BLOCK - 1) // SAMPLE_BLOCK)]
    cbn = fm.source
    codes = np.concatenate(blocks, axis=1)
    domains = [np.array(cbn.domain(v), dtype=object) for v in cbn.names]
    cols = [domains[k][codes[k]] for k in range(len(cbn.names))]
    rows = tuple(zip(*cols))
    return Dataset(cbn.names, rows)


def sample_block(fm: FunctionalModel, seed: int, block: int, size: int):
    """Integer-coded columns (in ``cbn.names`` order) for one block of samples."""
    cbn = fm.source
    rng = np.random.default_rng([seed, block])
    ctx_p = np.array([float(p) for _, p in fm.measure.contexts])
    ctx_idx = rng.choice(len(ctx_p), size=size, p=ctx_p / ctx_p.sum())
    code = {var: {v: i for i, v in enumerate(cbn.domain(var))} for var in cbn.names}
    values = {}
    ctx_codes = np.array([[code[u][x] for u, x in zip(cbn.exogenous, ctx)]
                          for ctx, _ in fm.measure.contexts], dtype=np.int64).reshape(len(ctx_p), -1)
    for k, u in enumerate(cbn.exogenous):
        values[u] = ctx_codes[ctx_idx, k]
    tables = dict(fm.measure.functions)
    for var in cbn.order:
        if cbn.is_exogenous(var):
            continue
        table = tables[var]
        p = np.array([float(q) for _, q in table])
        pick = rng.choice(len(table), size=size, p=p / p.sum())
        outs = np.array([[code[var][o] for o in rf.outputs] for rf, _ in table], dtype=np.int64)
        setting = np.zeros(size, dtype=np.int64)
        for par in cbn.parents(var):
            setting = setting * len(cbn.domain(par)) + values[par]
        values[var] = outs[pick, setting]
    return np.array([values[v] for v in cbn.names], dtype=np.int64).reshape(len(cbn.names), size)


# -- export -------------------------------------------------------------------

def fcm_to_dict(fm: FunctionalModel):
    cbn = fm.source
    doc = {
        "format": FORMAT,
        "exogenous": [{"name": u, "domain": list(cbn.domain(u))} for u in cbn.exogenous],
        "contexts": [{"values": dict(zip(cbn.exogenous, ctx)), "p": str(p)}
                     for ctx, p in fm.measure.contexts],
        "response_variables": [],
        "positive_contexts": fm.measure.size,
    }
    for var, table in fm.measure.functions:
        rfs = [{"index": rf.index, "outputs": list(rf.outputs), "p": str(p)} for rf, p in table]
        doc["response_variables"].append({
            "name": fm.response_variable(var),
            "variable": var,
            "parents": list(cbn.parents(var)),
            "settings": [list(s) for s in cbn.parent_settings(var)],
            "functions": rfs,
        })
    return doc


def dump_fcm(fm: FunctionalModel, path_or_file):
    doc = fcm_to_dict(fm)
    if hasattr(path_or_file, "write"):
        json.dump(doc, path_or_file, indent=2)
        path_or_file.write("\n")
        return
    try:
        with open(path_or_file, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise DataError("cannot write %s: %s" % (path_or_file, exc.strerror)) from None


def weighted_dataset(fm: FunctionalModel) -> Dataset:
    """Every positive-measure extended context as one row weighted by its measure."""
    names = fm.source.names
    rows, weights = [], []
    for ctx, p in fm.contexts():
        values = solve(fm, ctx)
        rows.append(tuple(values[n] for n in names))
        weights.append(p)
    return Dataset(names, tuple(rows), tuple(weights))


# -- audits ---------------------------------------------------------------------

@dataclass(frozen=True)
class Entry:
    """One cpt cell read as a formula: ``[parents<-setting](child=value)``."""

    child: str
    value: str
    setting: Tuple[Tuple[str, str], ...]
    prob: Fraction

    @property
    def formula(self):
        event = Event(self.child, self.value)
        if not self.setting:
            return event
        return Do(InterventionSet(self.setting), event)

    @property
    def slot(self):
        return (self.child, self.setting)


def cpt_entries(cbn: CBN):
    out = []
    for var in cbn.order:
        cpt = cbn.cpts.get(var)
        if cpt is None:
            continue
        for s in cbn.parent_settings(var):
            for v in cbn.domain(var):
                out.append(Entry(var, v, tuple(zip(cpt.parents, s)), cpt.prob(v, s)))
    return out


def compatibility_audit(fm: FunctionalModel):
    """``(entry, oracle value)`` for every cpt cell; compatible when they all match."""
    return [(e, oracle_probability(fm, e.formula)) for e in cpt_entries(fm.source)]


def independence_audit(fm: FunctionalModel, values_per_slot=1):
    """``(entry, entry, joint, product)`` for pairs of cells from distinct slots.

    Only the first ``values_per_slot`` values of each slot take part, which
    keeps the pair count quadratic in the number of slots.
    """
    picked = []
    seen = {}
    for e in cpt_entries(fm.source):
        k = seen.get(e.slot, 0)
        if k < values_per_slot:
            picked.append(e)
            seen[e.slot] = k + 1
    out = []
    single = {e: oracle_probability(fm, e.formula) for e in picked}
    for i, a in enumerate(picked):
        for b in picked[i + 1:]:
            if a.slot == b.slot:
                continue
            joint = oracle_probability(fm, And((a.formula, b.formula)))
            out.append((a, b, joint, single[a] * single[b]))
    return out
