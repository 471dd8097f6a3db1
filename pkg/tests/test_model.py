import numpy as np
import pytest

from policymc import (ExplicitDtmc, ExplicitMdp, FormatError, LabelRule,
                      LabelRuleSet, ModelError, ObservationTable,
                      ParseError, apply_label_rules, load_label_rules,
                      load_observation_table, validate_mdp)


def tiny_mdp():
    transitions = [
        {0: ((0, 0.5), (1, 0.5)), 1: ((1, 1.0),)},
        {0: ((1, 1.0),)},
    ]
    return ExplicitMdp(2, 0, ("a", "b"), transitions,
                       {"done": frozenset({1})})


def test_mdp_accessors():
    m = tiny_mdp()
    assert m.n_states == 2
    assert m.enabled_actions(0) == [0, 1]
    assert m.enabled_actions(1) == [0]
    assert m.distribution(0, 1) == ((1, 1.0),)
    with pytest.raises(ModelError, match="not enabled"):
        m.distribution(1, 1)
    assert m.action_name(1) == "b"
    assert m.states_with_label("done") == frozenset({1})
    assert m.states_with_label("missing") == frozenset()
    assert m.transition_count() == 4
    assert m.choice_count() == 3


def test_validate_mdp_ok_and_violations():
    assert validate_mdp(tiny_mdp()) == []
    bad = ExplicitMdp(3, 5, ("a",), [
        {0: ((0, 0.7), (1, 0.2))},
        {},
        {0: ((9, 1.0),)},
    ])
    report = validate_mdp(bad)
    assert any("sums to" in v for v in report)
    assert any("deadlock" in v for v in report)
    assert any("successor 9" in v for v in report)
    assert any("initial state 5" in v for v in report)


def test_validate_single_absorbing_state_ok():
    m = ExplicitMdp(1, 0, ("stay",), [{0: ((0, 1.0),)}])
    assert validate_mdp(m) == []


def test_with_labels_copies():
    m = tiny_mdp()
    m2 = m.with_labels({"other": {0}})
    assert m2.labels == {"other": frozenset({0})}
    assert m.labels == {"done": frozenset({1})}
    assert m2.transitions == m.transitions


def test_dtmc_round_trip_through_mdp():
    d = ExplicitDtmc(2, 0, [((0, 0.25), (1, 0.75)), ((1, 1.0),)],
                     {"done": frozenset({1})})
    m = d.as_mdp()
    assert m.n_states == 2
    assert m.enabled_actions(0) == [0]
    assert m.distribution(0, 0) == ((0, 0.25), (1, 0.75))
    assert m.labels["done"] == frozenset({1})
    assert m.actions == ("step",)


def test_observation_table_basics():
    t = ObservationTable(3, ["hr", "bp"], {0: [1.0, 2.0], 2: [3.0, 4.0]})
    assert t.has_row(0) and not t.has_row(1)
    assert np.array_equal(t.observe(1), np.zeros(2))
    assert np.array_equal(t.observe(2), [3.0, 4.0])
    assert t.feature_index("bp") == 1
    assert np.array_equal(t.feature_values(1), [2.0, 4.0])
    with pytest.raises(ModelError, match="unknown feature"):
        t.feature_index("missing")


def test_observation_table_rejects_bad_rows():
    with pytest.raises(ModelError, match="expected 2"):
        ObservationTable(2, ["a", "b"], {0: [1.0]})
    with pytest.raises(ModelError, match="non-finite"):
        ObservationTable(2, ["a"], {0: [float("nan")]})
    with pytest.raises(ModelError, match="duplicate"):
        ObservationTable(2, ["a", "a"], {})


def test_observation_rows_read_only():
    t = ObservationTable(2, ["f"], {0: [1.0]})
    with pytest.raises(ValueError):
        t.observe(0)[0] = 9.0
    with pytest.raises(ValueError):
        t.observe(1)[0] = 9.0


def test_label_rule_threshold_and_percentile():
    t = ObservationTable(4, ["hr"], {s: [float(v)]
                                     for s, v in enumerate([1, 2, 3, 4])})
    plain = LabelRule("high", "hr", ">=", 3.0)
    assert plain.resolve_threshold(t) == 3.0
    pct = LabelRule("high", "hr", ">=", "p75")
    # Linear interpolation lands p75 of [1,2,3,4] at rank 3.25.
    assert pct.resolve_threshold(t) == pytest.approx(3.25, abs=1e-12)
    assert np.percentile([1, 2, 3, 4], 75) == pytest.approx(3.25)


def test_label_rule_validation():
    with pytest.raises(ModelError, match="comparator"):
        LabelRule("x", "f", "!=", 1.0)
    with pytest.raises(ModelError, match="percentile"):
        LabelRule("x", "f", ">", "p150")
    with pytest.raises(ModelError, match="percentile"):
        LabelRule("x", "f", ">", "pabc")


def test_apply_label_rules_examples():
    m = ExplicitMdp(4, 0, ("a",),
                    [{0: ((s + 1 if s < 3 else s, 1.0),)} for s in range(4)])
    t = ObservationTable(4, ["f"], {s: [float(v)]
                                    for s, v in enumerate([1, 2, 3, 4])})
    rules = LabelRuleSet([LabelRule("high_f", "f", ">=", "p75")])
    merged = apply_label_rules(m, t, rules)
    assert merged["high_f"] == frozenset({3})

    t2 = ObservationTable(3, ["f"], {0: [0.0], 1: [0.0], 2: [5.0]})
    merged = apply_label_rules(m.with_labels({}), t2,
                               LabelRuleSet([LabelRule("pos_f", "f", ">", 0)]))
    assert merged["pos_f"] == frozenset({2})

    merged = apply_label_rules(m.with_labels({}), t2,
                               LabelRuleSet([LabelRule("all", "f", ">=", "p0")]))
    assert merged["all"] == frozenset({0, 1, 2})


def test_apply_label_rules_preserves_and_skips_rowless():
    m = ExplicitMdp(3, 0, ("a",),
                    [{0: ((1, 1.0),)}, {0: ((2, 1.0),)}, {0: ((2, 1.0),)}],
                    {"old": frozenset({0})})
    t = ObservationTable(3, ["hr"], {0: [10.0], 1: [1.0]})
    rules = LabelRuleSet([LabelRule("fast", "hr", ">", 5.0)])
    merged = apply_label_rules(m, t, rules)
    assert merged["fast"] == frozenset({0})
    assert merged["old"] == frozenset({0})
    # State 2 has no observation row, so no rule may label it.
    assert all(2 not in members for members in merged.values())


def test_apply_label_rules_idempotent():
    rng = np.random.default_rng(5)
    m = ExplicitMdp(5, 0, ("a",), [{0: ((s, 1.0),)} for s in range(5)])
    t = ObservationTable(5, ["f", "g"],
                         {s: rng.uniform(0, 10, 2) for s in range(5)})
    rules = LabelRuleSet([LabelRule("hi", "f", ">=", "p50"),
                          LabelRule("lo", "g", "<", "p25")])
    once = apply_label_rules(m, t, rules)
    twice = apply_label_rules(m.with_labels(once), t, rules)
    assert once == twice


def test_percentile_invariant_under_state_order():
    values = [4.0, 1.0, 3.0, 2.0, 9.0]
    t1 = ObservationTable(5, ["f"], {s: [values[s]] for s in range(5)})
    shuffled = {4 - s: [values[s]] for s in range(5)}
    t2 = ObservationTable(5, ["f"], shuffled)
    r = LabelRule("x", "f", ">", "p60")
    assert r.resolve_threshold(t1) == r.resolve_threshold(t2)


def test_load_observation_table(tmp_path):
    p = tmp_path / "obs.csv"
    p.write_text("state,hr,bp\n0,1.5,2.5\n2,3.5,4.5\n")
    t = load_observation_table(str(p), n_states=3)
    assert t.feature_names == ("hr", "bp")
    assert np.array_equal(t.observe(2), [3.5, 4.5])
    bad = tmp_path / "bad.csv"
    bad.write_text("hr,bp\n1,2\n")
    with pytest.raises(FormatError, match="state"):
        load_observation_table(str(bad))
    dup = tmp_path / "dup.csv"
    dup.write_text("state,hr\n0,1\n0,2\n")
    with pytest.raises(FormatError, match="duplicate state 0"):
        load_observation_table(str(dup))


def test_load_label_rules(tmp_path):
    p = tmp_path / "rules.txt"
    p.write_text("# comment\nlabel high := hr >= p75\nlabel low := hr < 2\n")
    rules = load_label_rules(str(p))
    assert len(rules) == 2
    assert rules.rules[0].label == "high"
    assert rules.rules[0].threshold == "p75"
    assert rules.rules[1].threshold == 2.0
    bad = tmp_path / "bad.txt"
    bad.write_text("label x = hr > 1\n")
    with pytest.raises(ParseError, match="malformed label rule"):
        load_label_rules(str(bad))
    badpct = tmp_path / "badpct.txt"
    badpct.write_text("label x := hr > p500\n")
    with pytest.raises(ParseError, match="percentile"):
        load_label_rules(str(badpct))
