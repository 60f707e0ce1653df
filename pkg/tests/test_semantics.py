import random
from fractions import Fraction as F

import pytest

from cbnquery.errors import CapExceeded, FormulaError, UndefinedConditional
from cbnquery.formula import And, Event, Not, Or, parse, to_canonical_dnf
from cbnquery.generate import (chain_model, confounded_chain_model, deterministic_chain,
                               random_cbn, random_formula)
from cbnquery.model import CBN, EXOGENOUS, binary, binary_cpt
from cbnquery.semantics import (CONTEXT, Ccce, Fccce, conditional_probability, count_ccces,
                                count_fccces, entailing, entails, enumerate_ccces,
                                enumerate_fccces, format_selection, forward_probability,
                                probability)

PARAMS = (F(1, 3), F(1, 4), F(2, 5), F(3, 7), F(1, 6))
PHI = "X=0 & Y=0 & [X<-1](Y=1)"


def chain():
    return chain_model(*PARAMS)


def test_counts_chain():
    m = chain()
    assert len(list(enumerate_ccces(m))) == 32 == count_ccces(m)
    assert len(list(enumerate_fccces(m))) == 16 == count_fccces(m)


def test_counts_confounded_chain():
    m = confounded_chain_model(*[F(1, 3)] * 7)
    assert len(list(enumerate_ccces(m))) == 128
    assert len(list(enumerate_fccces(m))) == 16


def test_single_root():
    m = CBN((binary("U", EXOGENOUS),), [binary_cpt("U", (), F(2, 7))])
    stream = list(enumerate_fccces(m))
    assert [p for _, p in stream] == [F(2, 7), F(5, 7)]


def test_probabilities_sum_to_one():
    m = chain()
    assert sum(p for _, p in enumerate_ccces(m)) == 1
    assert sum(p for _, p in enumerate_fccces(m)) == 1


def test_fccce_is_sum_of_extending_ccces():
    m = chain()
    ccces = list(enumerate_ccces(m))
    for sel, p in enumerate_fccces(m):
        total = sum(q for c, q in ccces if all(c.mapping[k] == v for k, v in sel.choices))
        assert total == p


def test_zero_entries_skipped():
    m = chain_model(1, F(1, 2), F(1, 2), F(1, 2), F(1, 2))
    # U=1 has probability 0, so only the U=0 context remains
    assert len(list(enumerate_fccces(m))) == 8
    assert len(list(enumerate_fccces(m, skip_zero=False))) == 16
    assert count_fccces(m, skip_zero=True) == 8
    assert len(list(enumerate_ccces(m))) == 16


def test_cap():
    with pytest.raises(CapExceeded):
        list(enumerate_ccces(chain(), cap=31))
    with pytest.raises(CapExceeded):
        list(enumerate_fccces(chain(), cap=15))
    with pytest.raises(CapExceeded):
        probability(chain(), parse(PHI), prune=False, cap=10)


def fccce_a(m):
    return Fccce(((("U", ()), "0"), (("X", ("0",)), "0"), (("Y", ("0",)), "0"), (("Y", ("1",)), "1")))


def test_entailment_examples():
    m = chain()
    sel = fccce_a(m)
    assert entails(sel, parse(PHI), m)
    assert not entails(sel, parse("[X<-1](Y=0)"), m)
    for s, _ in enumerate_fccces(m):
        assert entails(s, parse("[X<-1](X=1)"), m)
    assert format_selection(sel, m) == "U=0; X=0|U=0; Y=0|X=0; Y=1|X=1"


def test_fccce_rejects_probe_outside_context():
    m = confounded_chain_model(*[F(1, 3)] * 7)
    sel, _ = next(iter(enumerate_fccces(m)))
    with pytest.raises(FormulaError):
        entails(sel, parse("[U<-1](Y=1)"), m)


def test_closed_forms():
    a, b, c, d, e = PARAMS
    assert probability(chain(), parse(PHI)) == a * b * d * (1 - e) + (1 - a) * c * d * (1 - e)
    f1, f2, f3, f4 = F(1, 2), F(1, 3), F(1, 5), F(2, 3)
    confounded = confounded_chain_model(a, b, c, f1, f2, f3, f4)
    assert probability(confounded, parse(PHI)) == a * b * f1 * (1 - f2) + (1 - a) * c * f3 * (1 - f4)


def test_entailing_fccces_listed():
    m = chain()
    hits = [format_selection(s, m) for s, _ in entailing(m, parse(PHI))]
    assert hits == ["U=0; X=0|U=0; Y=0|X=0; Y=1|X=1", "U=1; X=0|U=1; Y=0|X=0; Y=1|X=1"]


def test_conditioning_on_the_event_itself():
    m = deterministic_chain()
    x1 = parse("X=1")
    assert conditional_probability(m, x1, x1) == 1
    assert probability(m, x1) == F(1, 2)


def test_conditional_on_all_halves_chain():
    m = chain_model(1, F(1, 2), F(1, 2), F(1, 2), F(1, 2))
    assert conditional_probability(m, parse("[X<-1](Y=0)"), parse("Y=1")) == F(1, 4)


def test_conditional_identities():
    m = chain()
    f = parse("[X<-0](Y=1) | X=1")
    taut = parse("X=0 | !X=0")
    assert conditional_probability(m, f, f) == 1
    assert conditional_probability(m, f, taut) == probability(m, f)
    with pytest.raises(UndefinedConditional):
        conditional_probability(m, f, parse("X=0 & X=1"))


def test_dichotomy_and_consistency():
    rng = random.Random(3)
    for _ in range(15):
        m = random_cbn(rng, n_vars=rng.randint(2, 4))
        ccces = list(enumerate_ccces(m))
        for _ in range(4):
            f = random_formula(rng, m)
            for sel, _ in ccces[:64]:
                assert entails(sel, f, m) != entails(sel, Not(f), m)
            by_ccce = sum(p for sel, p in ccces if entails(sel, f, m))
            by_fccce = sum(p for sel, p in enumerate_fccces(m) if entails(sel, f, m))
            assert by_ccce == by_fccce == probability(m, f) == probability(m, f, prune=False)


def test_exogenous_formulas_use_ccces():
    rng = random.Random(8)
    for _ in range(15):
        m = random_cbn(rng, n_vars=4)
        f = random_formula(rng, m, exogenous=True)
        assert probability(m, f) == probability(m, f, prune=False)


def test_matches_forward_inference_for_simple_formulas():
    rng = random.Random(4)
    for _ in range(30):
        m = random_cbn(rng)
        f = random_formula(rng, m, max_do=0)
        assert probability(m, f) == forward_probability(m, f)


def test_additivity_over_exclusive_disjuncts():
    rng = random.Random(6)
    for _ in range(20):
        m = random_cbn(rng)
        f = random_formula(rng, m)
        g = random_formula(rng, m)
        exclusive = Or((And((f, g)), And((f, Not(g)))))
        assert probability(m, exclusive) == probability(m, And((f, g))) + probability(m, And((f, Not(g))))
        assert probability(m, exclusive) == probability(m, f)
        dnf = to_canonical_dnf(Or((f, g)), m)
        assert probability(m, Or((f, g))) == sum(probability(m, d.to_formula()) for d in dnf)


def test_joint_context_table():
    variables = (binary("U1", EXOGENOUS), binary("U2", EXOGENOUS), binary("X"), binary("Y"))
    cpts = [binary_cpt("X", ("U1",), {"0": F(1, 3), "1": F(3, 4)}),
            binary_cpt("Y", ("X", "U2"), {("0", "0"): F(1, 2), ("0", "1"): F(1, 5),
                                          ("1", "0"): F(2, 3), ("1", "1"): F(1, 4)})]
    table = {("0", "0"): F(1, 2), ("0", "1"): F(1, 6), ("1", "1"): F(1, 3)}
    m = CBN(variables, cpts, table)
    sels = list(enumerate_ccces(m))
    assert sum(p for _, p in sels) == 1
    assert all(s.choices[0][0] == (CONTEXT, ()) for s, _ in sels)
    for text in ("U1=0 & U2=0", "[X<-1](Y=1) & X=0", "[U1<-1](X=1) & Y=0", "U2=1 | [X<-0](Y=0)"):
        f = parse(text, m)
        assert probability(m, f) == probability(m, f, prune=False)
    assert probability(m, parse("U1=1 & U2=0", m)) == 0
    assert probability(m, parse("U1=0 & U2=0", m)) == F(1, 2)


def test_unknown_variable():
    from cbnquery.errors import ModelError
    with pytest.raises(ModelError):
        probability(chain(), Event("Q", "0"))


def test_selection_types():
    sel, _ = next(iter(enumerate_ccces(chain())))
    assert isinstance(sel, Ccce) and len(sel) == 5
    ev = list(sel.events(chain()))
    assert str(ev[1]) == "X=0|U=0"
