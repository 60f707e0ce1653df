import json
from fractions import Fraction as F

import pytest

from cbnquery.errors import ModelError
from cbnquery.generate import chain_model, confounded_chain_model
from cbnquery.model import (CBN, EXOGENOUS, Cpt, InterventionSet, Variable, binary,
                            binary_cpt, cbn_from_dict, cbn_to_dict, dump_cbn, intervene,
                            joint_distribution, load_cbn, parse_probability,
                            topological_order, validate)


def half_chain():
    return chain_model(F(1, 2), F(1, 2), F(1, 2), F(1, 2), F(1, 2))


def test_parse_probability_forms():
    assert parse_probability("1/3") == F(1, 3)
    assert parse_probability("0.1") == F(1, 10)
    assert parse_probability(0.1) == F(1, 10)
    assert parse_probability(1) == 1
    with pytest.raises(ModelError):
        parse_probability("abc")
    with pytest.raises(ModelError):
        parse_probability(True)


def test_valid_chain():
    assert validate(half_chain()).ok


def test_row_sum_violation():
    cbn = CBN((binary("U", EXOGENOUS), binary("X")),
              [binary_cpt("U", (), F(1, 2)),
               Cpt("X", ("U",), {("0",): {"0": "0.5", "1": "0.4"}, ("1",): {"0": 1}})])
    report = validate(cbn)
    assert not report.ok
    assert any("row sum 9/10 != 1" in v for v in report.violations)


def test_cycle_violation():
    cbn = CBN((binary("X"), binary("Y")),
              [binary_cpt("X", ("Y",), {"0": F(1, 2), "1": F(1, 2)}),
               binary_cpt("Y", ("X",), {"0": F(1, 2), "1": F(1, 2)})])
    assert any("cycle" in v for v in validate(cbn).violations)
    with pytest.raises(ModelError):
        topological_order(cbn)


def test_missing_row_and_unknown_parent():
    cbn = CBN((binary("X"), binary("Y")),
              [binary_cpt("X", (), F(1, 2)),
               Cpt("Y", ("X",), {("0",): {"0": 1}}),
               ])
    assert any("missing row X=1" in v for v in validate(cbn).violations)
    cbn = CBN((binary("X"),), [binary_cpt("X", ("Z",), {"0": F(1, 2), "1": F(1, 2)})])
    assert any("unknown parent Z" in v for v in validate(cbn).violations)


def test_exogenous_with_parents_rejected():
    cbn = CBN((binary("X"), binary("U", EXOGENOUS)),
              [binary_cpt("X", (), F(1, 2)), binary_cpt("U", ("X",), {"0": 1, "1": 1})])
    assert any("exogenous U has parents" in v for v in validate(cbn).violations)


def test_variable_invariants():
    cbn = CBN((Variable("X", "endogenous", ()), Variable("Y", "endogenous", ("a", "a"))), {})
    report = validate(cbn)
    assert any("empty domain" in v for v in report.violations)
    assert any("repeated domain values" in v for v in report.violations)
    with pytest.raises(ModelError):
        Variable("X", "latent", ("0",))


def test_topological_order_examples():
    assert topological_order(half_chain()) == ("U", "X", "Y")
    confounded = confounded_chain_model(*[F(1, 2)] * 7)
    assert topological_order(confounded) == ("U", "X", "Y")
    roots = CBN((binary("A"), binary("B")), [binary_cpt("B", (), F(1, 3)), binary_cpt("A", (), F(1, 4))])
    assert topological_order(roots) == ("A", "B")


def test_topological_order_respects_declaration_ties():
    cbn = CBN((binary("Y"), binary("U", EXOGENOUS), binary("X")),
              [binary_cpt("U", (), F(1, 2)),
               binary_cpt("X", ("U",), {"0": F(1, 2), "1": F(1, 3)}),
               binary_cpt("Y", ("X",), {"0": F(1, 2), "1": F(1, 3)})])
    assert topological_order(cbn) == ("U", "X", "Y")


def test_intervene_point_mass_and_original_untouched():
    m = half_chain()
    m1 = intervene(m, {"X": "1"})
    assert m1.parents("X") == ()
    assert m1.cpts["X"].prob("1") == 1 and m1.cpts["X"].prob("0") == 0
    assert m1.cpts["Y"] == m.cpts["Y"]
    assert m.parents("X") == ("U",)


def test_intervene_exogenous():
    confounded = confounded_chain_model(*[F(1, 3)] * 7)
    m = intervene(confounded, InterventionSet.of({"U": "0"}))
    assert m.cpts["U"].prob("0") == 1


def test_intervene_errors():
    m = half_chain()
    with pytest.raises(ModelError):
        InterventionSet((("X", "0"), ("X", "1")))
    with pytest.raises(ModelError):
        intervene(m, {"Q": "0"})
    with pytest.raises(ModelError):
        intervene(m, {"X": "7"})


def test_intervention_set_canonical_order():
    a = InterventionSet.of({"Z": "1", "X": "0"})
    b = InterventionSet((("X", "0"), ("Z", "1")))
    assert a == b and hash(a) == hash(b)
    assert str(a) == "X<-0, Z<-1"
    assert InterventionSet((("X", "0"), ("X", "0"))) == InterventionSet.of({"X": "0"})


def test_intervene_properties():
    m = chain_model(F(1, 3), F(1, 4), F(2, 5), F(3, 7), F(1, 6))
    iv = InterventionSet.of({"X": "1"})
    assert intervene(intervene(m, iv), iv) == intervene(m, iv)
    a, b = {"X": "1"}, {"U": "0"}
    assert intervene(intervene(m, a), b) == intervene(intervene(m, b), a)
    assert validate(intervene(m, {"X": "0", "U": "1"})).ok


def test_joint_distribution_sums_to_one():
    m = chain_model(F(1, 3), F(1, 4), F(2, 5), F(3, 7), F(1, 6))
    joint = joint_distribution(m)
    assert sum(joint.values()) == 1
    assert joint[("0", "0", "0")] == F(1, 3) * F(1, 4) * F(3, 7)


def test_context_table_model():
    variables = (binary("U1", EXOGENOUS), binary("U2", EXOGENOUS), binary("X"))
    cpts = [binary_cpt("X", ("U1", "U2"), {("0", "0"): 1, ("0", "1"): F(1, 2),
                                            ("1", "0"): F(1, 2), ("1", "1"): 0})]
    table = {("0", "0"): F(1, 2), ("1", "1"): F(1, 2)}
    cbn = CBN(variables, cpts, table)
    assert validate(cbn).ok
    assert cbn.context_distribution() == table
    moved = intervene(cbn, {"U1": "0"})
    assert moved.context_distribution() == {("0", "0"): F(1, 2), ("0", "1"): F(1, 2)}
    bad = CBN(variables, cpts, {("0", "0"): F(1, 2)})
    assert any("context table" in v for v in validate(bad).violations)


def test_json_round_trip(tmp_path):
    m = confounded_chain_model(F(1, 3), F(1, 4), F(2, 5), F(1, 2), F(1, 3), F(1, 5), F(2, 3))
    path = tmp_path / "m.json"
    dump_cbn(m, path)
    assert load_cbn(path) == m
    doc = json.loads(path.read_text())
    assert doc["format"] == "cbn/1"


def test_json_decimal_probabilities_are_exact():
    doc = {"format": "cbn/1",
           "variables": [{"name": "X", "kind": "endogenous", "domain": ["0", "1"]}],
           "cpts": [{"child": "X", "parents": [], "rows": [{"given": {}, "dist": {"0": "0.1", "1": "0.9"}}]}]}
    cbn = cbn_from_dict(doc)
    assert cbn.cpts["X"].prob("0") == F(1, 10)
    assert validate(cbn).ok
    assert cbn_from_dict(cbn_to_dict(cbn)) == cbn


def test_json_errors():
    with pytest.raises(ModelError):
        cbn_from_dict({"format": "cbn/2", "variables": []})
    with pytest.raises(ModelError):
        cbn_from_dict({"variables": [{"name": "X"}]})
