import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbnquery.errors import CapExceeded, FormulaError
from cbnquery.formula import (And, Disjunct, Do, Event, L, Literal, Not, Or, do, merge_same_interventions,
                              pairwise_exclusive, parse, pretty, push_negations,
                              simplify_disjunct, to_canonical_dnf)
from cbnquery.generate import chain_model, random_cbn, random_formula
from cbnquery.model import CBN, EXOGENOUS, InterventionSet, binary, binary_cpt
from cbnquery.semantics import probability

X0, X1, Y0, Y1 = Event("X", "0"), Event("X", "1"), Event("Y", "0"), Event("Y", "1")


def chain():
    return chain_model(F(1, 3), F(1, 4), F(2, 5), F(3, 7), F(1, 6))


# -- parsing ---------------------------------------------------------------------

def test_parse_counterfactual_conjunction():
    assert parse("X=0 & Y=0 & [X<-1](Y=1)") == And((X0, Y0, Do(InterventionSet.of({"X": "1"}), Y1)))


def test_parse_negation_and_precedence():
    assert parse("!(X=1)") == Not(X1)
    assert parse("!X=1 & Y=0 | Y=1") == Or((And((Not(X1), Y0)), Y1))
    assert parse("X=0 | Y=0 & Y=1") == Or((X0, And((Y0, Y1))))


def test_parse_multi_assignment_is_canonical():
    a = parse("[Z<-1, X<-0](Y=1)")
    b = parse("[X<-0, Z<-1](Y=1)")
    assert a == b
    assert a.iv.assignments == (("X", "0"), ("Z", "1"))


def test_nested_intervention_rejected():
    with pytest.raises(FormulaError) as err:
        parse("[X<-1]([Y<-0](Z=1))")
    assert "nested" in str(err.value)
    assert err.value.pos == 7


@pytest.mark.parametrize("text, pos", [
    ("X=0 &", 5), ("X=", 2), ("(X=0", 4), ("X=0 Y=1", 4), ("[X<-1]Y=1", 6), ("X=0 # 1", 4), ("", 0),
])
def test_syntax_errors_carry_positions(text, pos):
    with pytest.raises(FormulaError) as err:
        parse(text)
    assert err.value.pos == pos
    assert "^" in str(err.value)


def test_repeated_intervention_variable():
    with pytest.raises(FormulaError):
        parse("[X<-0, X<-1](Y=1)")


def test_binding_checks():
    m = chain()
    with pytest.raises(FormulaError, match="unknown variable Q"):
        parse("Q=0", m)
    with pytest.raises(FormulaError, match="outside the domain"):
        parse("X=2", m)
    with pytest.raises(FormulaError, match="not allowed in L"):
        parse("U=0 & X=1", m, language=L)
    with pytest.raises(FormulaError, match="not allowed in L"):
        parse("[U<-0](X=1)", m, language=L)
    assert parse("[U<-0](X=1)", m) == do({"U": "0"}, X1)


def test_operators_build_nodes():
    assert (X0 & Y1) == And((X0, Y1))
    assert (X0 | Y1) == Or((X0, Y1))
    assert ~X0 == Not(X0)


# -- printing round trip -------------------------------------------------------------

names = st.sampled_from(["X", "Y", "Z", "W1", "u_2"])
values = st.sampled_from(["0", "1", "2", "a", "hi"])
events = st.builds(Event, names, values)


def simple(depth):
    if depth == 0:
        return events
    sub = simple(depth - 1)
    return st.one_of(events, st.builds(Not, sub),
                     st.builds(And, st.lists(sub, min_size=2, max_size=3).map(tuple)),
                     st.builds(Or, st.lists(sub, min_size=2, max_size=3).map(tuple)))


interventions = st.dictionaries(names, values, min_size=1, max_size=3).map(InterventionSet.of)


def formulas(depth):
    if depth == 0:
        return st.one_of(events, st.builds(Do, interventions, simple(2)))
    sub = formulas(depth - 1)
    return st.one_of(sub, st.builds(Not, sub),
                     st.builds(And, st.lists(sub, min_size=2, max_size=3).map(tuple)),
                     st.builds(Or, st.lists(sub, min_size=2, max_size=3).map(tuple)))


@settings(max_examples=300, deadline=None)
@given(formulas(3))
def test_parse_inverts_pretty(f):
    assert parse(pretty(f)) == f


# -- rewrites ------------------------------------------------------------------------

def test_push_negations_examples():
    iv = InterventionSet.of({"X": "1"})
    assert push_negations(Not(Do(iv, Y1))) == Do(iv, Not(Y1))
    assert push_negations(Not(Not(X0))) == X0
    assert push_negations(Not(And((X0, Y1)))) == Or((Not(X0), Not(Y1)))


def _no_negated_do(f):
    if isinstance(f, Not):
        return not isinstance(f.arg, (Do, And, Or, Not)) and _no_negated_do(f.arg)
    if isinstance(f, (And, Or)):
        return all(_no_negated_do(a) for a in f.args)
    if isinstance(f, Do):
        return _no_negated_do(f.body)
    return True


def test_merge_same_interventions_examples():
    a = InterventionSet.of({"X": "0"})
    z = Event("Z", "1")
    assert merge_same_interventions(And((Do(a, Y1), Do(a, z)))) == And((Do(a, And((Y1, z))),))
    b = InterventionSet.of({"X": "1"})
    assert merge_same_interventions(And((Do(a, Y1), Do(b, Y1)))) == And((Do(a, Y1), Do(b, Y1)))
    p = parse("[X<-0, Z<-1](Y=1) & [Z<-1, X<-0](Y=0)")
    merged = merge_same_interventions(p)
    assert len(merged.args) == 1 and isinstance(merged.args[0], Do)


def test_rewrites_preserve_probability():
    rng = random.Random(5)
    for _ in range(40):
        m = random_cbn(rng, n_vars=4)
        f = random_formula(rng, m)
        p = probability(m, f)
        nnf = push_negations(f)
        assert _no_negated_do(nnf)
        assert probability(m, nnf) == p
        assert probability(m, merge_same_interventions(nnf)) == p


# -- canonical DNF ----------------------------------------------------------------------

def test_seven_disjunct_expansion():
    e = [Event(v, "1") for v in "ABCD"]
    f = Or((And((e[0], e[1])), And((e[2], e[3]))))
    dnf = to_canonical_dnf(f)
    assert len(dnf) == 7
    assert pairwise_exclusive(dnf)
    last = Disjunct((Literal("A", "1", False), Literal("B", "1", False), Literal("C", "1"), Literal("D", "1")))
    assert last in dnf.disjuncts


def test_single_simple_formula():
    dnf = to_canonical_dnf(X0)
    assert len(dnf) == 1
    assert dnf.disjuncts[0] == Disjunct((Literal("X", "0"),), ())


def test_residual_collapses_with_domains():
    m = chain()
    dnf = to_canonical_dnf(Not(X0), m)
    assert dnf.disjuncts == (Disjunct((Literal("X", "1"),)),)
    # without domains the residual stays negative
    assert to_canonical_dnf(Not(X0)).disjuncts == (Disjunct((Literal("X", "0", False),)),)


def test_intervention_parts_are_distinct():
    f = parse("[X<-0](Y=1) & [X<-0](Y=1 | Y=0) & X=1")
    for d in to_canonical_dnf(f):
        sets = [iv for iv, _ in d.parts]
        assert len(sets) == len(set(sets))


def test_literal_cap():
    f = And(tuple(Event("V%d" % i, "1") for i in range(6)))
    with pytest.raises(CapExceeded):
        to_canonical_dnf(f, max_literals=5)


def test_dnf_sums_to_probability_on_four_variable_models():
    rng = random.Random(11)
    for _ in range(30):
        m = random_cbn(rng, n_vars=4)
        f = random_formula(rng, m)
        dnf = to_canonical_dnf(f, m)
        assert pairwise_exclusive(dnf)
        assert sum(probability(m, d.to_formula()) for d in dnf) == probability(m, f)


# -- per-disjunct simplification ----------------------------------------------------------

def collider():
    """X -> Y <- Z with exogenous drivers; Z is not an ancestor of X."""
    return CBN((binary("U", EXOGENOUS), binary("X"), binary("Z"), binary("W"), binary("Y")),
               [binary_cpt("U", (), F(2, 5)),
                binary_cpt("X", ("U",), {"0": F(1, 3), "1": F(3, 4)}),
                binary_cpt("Z", ("U",), {"0": F(1, 2), "1": F(1, 5)}),
                binary_cpt("W", ("U",), {"0": F(2, 3), "1": F(1, 4)}),
                binary_cpt("Y", ("X", "Z"), {("0", "0"): F(1, 7), ("0", "1"): F(2, 3),
                                             ("1", "0"): F(1, 2), ("1", "1"): F(3, 8)})])


def lit(var, value, positive=True):
    return Literal(var, value, positive)


def test_redundant_intervention_dropped():
    m = collider()
    d = Disjunct((lit("X", "0"),), ((InterventionSet.of({"X": "0", "Z": "1"}), (lit("Y", "1"),)),))
    s = simplify_disjunct(d, m)
    assert s == Disjunct((lit("X", "0"),), ((InterventionSet.of({"Z": "1"}), (lit("Y", "1"),)),))
    assert probability(m, s.to_formula()) == probability(m, d.to_formula())


def test_non_descendant_pulled_out():
    m = collider()
    d = Disjunct((), ((InterventionSet.of({"X": "1"}), (lit("W", "1"), lit("Y", "1"))),))
    s = simplify_disjunct(d, m)
    assert s == Disjunct((lit("W", "1"),), ((InterventionSet.of({"X": "1"}), (lit("Y", "1"),)),))
    assert probability(m, s.to_formula()) == probability(m, d.to_formula())


def test_child_of_intervened_stays():
    m = collider()
    d = Disjunct((), ((InterventionSet.of({"X": "1"}), (lit("Y", "1"),)),))
    assert simplify_disjunct(d, m) == d


def test_intervened_variable_in_body():
    m = collider()
    iv = InterventionSet.of({"X": "1"})
    assert simplify_disjunct(Disjunct((), ((iv, (lit("X", "0"),)),)), m) is None
    assert simplify_disjunct(Disjunct((), ((iv, (lit("X", "1"),)),)), m) == Disjunct()


def test_sets_remerged_after_dropping():
    m = collider()
    a = InterventionSet.of({"X": "0", "Z": "1"})
    b = InterventionSet.of({"Z": "1"})
    d = Disjunct((lit("X", "0"),), ((a, (lit("Y", "1"),)), (b, (lit("Y", "1"),))))
    s = simplify_disjunct(d, m)
    assert s.parts == ((b, (lit("Y", "1"),)),)


def test_intervention_kept_when_an_intervened_ancestor_can_move_it():
    # Z -> X -> Y and Z -> Y: with Z forced, X need not keep its observed value
    m = CBN((binary("U", EXOGENOUS), binary("Z"), binary("X"), binary("Y")),
            [binary_cpt("U", (), F(1, 2)),
             binary_cpt("Z", ("U",), {"0": F(1, 3), "1": F(2, 3)}),
             binary_cpt("X", ("Z",), {"0": F(1, 5), "1": F(4, 5)}),
             binary_cpt("Y", ("X", "Z"), {("0", "0"): F(1, 4), ("0", "1"): F(2, 3),
                                          ("1", "0"): F(5, 6), ("1", "1"): F(1, 7)})])
    both = InterventionSet.of({"X": "0", "Z": "1"})
    d = Disjunct((lit("X", "0"),), ((both, (lit("Y", "1"),)),))
    s = simplify_disjunct(d, m)
    assert s == d
    dropped = Disjunct((lit("X", "0"),), ((InterventionSet.of({"Z": "1"}), (lit("Y", "1"),)),))
    assert probability(m, dropped.to_formula()) != probability(m, d.to_formula())


def test_simplification_preserves_probability_on_random_models():
    rng = random.Random(23)
    for _ in range(60):
        m = random_cbn(rng)
        f = random_formula(rng, m)
        total = F(0)
        for d in to_canonical_dnf(f, m):
            s = simplify_disjunct(d, m)
            p = probability(m, d.to_formula())
            if s is None:
                assert p == 0
                continue
            assert probability(m, s.to_formula()) == p
            for iv, body in s.parts:
                reach = set().union(*(m.descendants(n) for n in iv.names))
                assert all(l.var in reach and l.var not in iv for l in body)
            total += p
        assert total == probability(m, f)
