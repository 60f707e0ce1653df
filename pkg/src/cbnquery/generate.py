"""Named example networks and random generators for models and formulas."""

import random
from fractions import Fraction

from .formula import And, Do, Event, Not, Or
from .model import CBN, EXOGENOUS, InterventionSet, binary, binary_cpt
from .semantics import count_ccces

F = Fraction


def chain_model(a, b, c, d, e) -> CBN:
    """U -> X -> Y, binary.

    P(U=0)=a, P(X=0|U=0)=b, P(X=0|U=1)=c, P(Y=0|X=0)=d, P(Y=0|X=1)=e.
    """
    return CBN(
        (binary("U", EXOGENOUS), binary("X"), binary("Y")),
        [binary_cpt("U", (), a),
         binary_cpt("X", ("U",), {"0": b, "1": c}),
         binary_cpt("Y", ("X",), {"0": d, "1": e})])


def confounded_chain_model(a, b, c, f1, f2, f3, f4) -> CBN:
    """Like :func:`chain_model` but U is also a parent of Y.

    P(Y=0|U=0,X=0)=f1, P(Y=0|U=0,X=1)=f2, P(Y=0|U=1,X=0)=f3, P(Y=0|U=1,X=1)=f4.
    """
    return CBN(
        (binary("U", EXOGENOUS), binary("X"), binary("Y")),
        [binary_cpt("U", (), a),
         binary_cpt("X", ("U",), {"0": b, "1": c}),
         binary_cpt("Y", ("U", "X"), {("0", "0"): f1, ("0", "1"): f2,
                                      ("1", "0"): f3, ("1", "1"): f4})])


def deterministic_chain(p_u1=F(1), p_x1_given_y1=F(1, 2), p_x1_given_y0=F(1, 2)) -> CBN:
    """U -> Y -> X where Y copies U exactly."""
    return CBN(
        (binary("U", EXOGENOUS), binary("Y"), binary("X")),
        [binary_cpt("U", (), 1 - F(p_u1)),
         binary_cpt("Y", ("U",), {"0": 1, "1": 0}),
         binary_cpt("X", ("Y",), {"0": 1 - F(p_x1_given_y0), "1": 1 - F(p_x1_given_y1)})])


def diamond_model(p1, p2, p3, py) -> CBN:
    """X1 -> X2, X1 -> X3, X2 -> Y, X3 -> Y with an exogenous driver U of X1.

    ``p1`` maps U's value to P(X1=0|U); ``p2``/``p3`` map X1's value to
    P(X2=0|X1) / P(X3=0|X1); ``py`` maps (X2, X3) to P(Y=0|X2,X3).  P(U=0)=1/2.
    """
    return CBN(
        (binary("U", EXOGENOUS), binary("X1"), binary("X2"), binary("X3"), binary("Y")),
        [binary_cpt("U", (), F(1, 2)),
         binary_cpt("X1", ("U",), p1),
         binary_cpt("X2", ("X1",), p2),
         binary_cpt("X3", ("X1",), p3),
         binary_cpt("Y", ("X2", "X3"), py)])


def copy_model(p_x0=F(1, 2)) -> CBN:
    """U -> X -> Y with X = U and Y = X, both deterministic."""
    return CBN(
        (binary("U", EXOGENOUS), binary("X"), binary("Y")),
        [binary_cpt("U", (), p_x0),
         binary_cpt("X", ("U",), {"0": 1, "1": 0}),
         binary_cpt("Y", ("X",), {"0": 1, "1": 0})])


# -- random models ---------------------------------------------------------

_DENOMINATORS = (2, 3, 4, 5, 6, 7, 8, 10)


def random_probability(rng: random.Random, positive=True) -> Fraction:
    den = rng.choice(_DENOMINATORS)
    if positive:
        return F(rng.randint(1, den - 1), den)
    return F(rng.randint(0, den), den)


def random_cbn(rng: random.Random, n_vars=None, max_parents=2, max_ccces=2 ** 11,
               positive=True, require_edge=None) -> CBN:
    """Random binary CBN with one or two exogenous roots.

    With ``positive`` every cpt entry lies strictly between 0 and 1.
    ``require_edge=(X, Y)`` forces the endogenous names X and Y to exist
    with X a parent of Y.
    """
    while True:
        n = n_vars or rng.randint(2, 5)
        n_exo = 1 if n <= 3 else rng.randint(1, 2)
        names = ["U%d" % i for i in range(n_exo)] + ["V%d" % i for i in range(n - n_exo)]
        endo = names[n_exo:]
        if require_edge is not None:
            if len(endo) < 2:
                continue
            # the last two endogenous variables play X and Y
            rename = {endo[-2]: require_edge[0], endo[-1]: require_edge[1]}
            names = [rename.get(x, x) for x in names]
        variables = [binary(x, EXOGENOUS) if i < n_exo else binary(x) for i, x in enumerate(names)]
        cpts = []
        for i, x in enumerate(names):
            if i < n_exo:
                cpts.append(binary_cpt(x, (), random_probability(rng, positive)))
                continue
            earlier = names[:i]
            k = rng.randint(0 if i > n_exo else 1, min(max_parents, len(earlier)))
            parents = rng.sample(earlier, k)
            if require_edge is not None and x == require_edge[1] and require_edge[0] not in parents:
                if len(parents) == max_parents:
                    parents[rng.randrange(len(parents))] = require_edge[0]
                else:
                    parents.append(require_edge[0])
            parents = tuple(p for p in names if p in parents)
            rows = {}
            for setting in _settings(len(parents)):
                rows[setting] = random_probability(rng, positive)
            cpts.append(binary_cpt(x, parents, rows))
        cbn = CBN(tuple(variables), cpts)
        if count_ccces(cbn) <= max_ccces:
            return cbn


def _settings(k):
    if k == 0:
        return [()]
    return [s + (v,) for s in _settings(k - 1) for v in ("0", "1")]


# -- random formulas -------------------------------------------------------

def random_formula(rng: random.Random, cbn: CBN, max_depth=3, max_do=2, exogenous=False):
    """Random formula of nesting depth at most ``max_depth`` with at most ``max_do`` interventions.

    Intervention bodies are intervention-free; only endogenous variables are
    used unless ``exogenous`` is set.
    """
    pool = [v for v in cbn.names if exogenous or not cbn.is_exogenous(v)]
    budget = [max_do]

    def event():
        var = rng.choice(pool)
        return Event(var, rng.choice(cbn.domain(var)))

    def build(depth, allow_do):
        if depth <= 1:
            if allow_do and budget[0] > 0 and rng.random() < 0.3:
                return intervention(1)
            return event()
        r = rng.random()
        if r < 0.2:
            return event()
        if r < 0.35:
            return Not(build(depth - 1, allow_do))
        if allow_do and budget[0] > 0 and r < 0.6:
            return intervention(depth)
        kids = tuple(build(depth - 1, allow_do) for _ in range(rng.randint(2, 3)))
        return And(kids) if rng.random() < 0.5 else Or(kids)

    def intervention(depth):
        budget[0] -= 1
        k = rng.randint(1, min(2, len(pool)))
        iv = InterventionSet.of({v: rng.choice(cbn.domain(v)) for v in rng.sample(pool, k)})
        return Do(iv, build(max(depth - 1, 1), False))

    return build(max_depth, True)

