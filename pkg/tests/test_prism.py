import pytest

from policymc import (ModelError, ParseError, build_explicit, parse_prism,
                      pretty_print, to_dtmc, validate_mdp)
from policymc.prism import Comparison, GuardAnd, GuardOr, guard_states

from conftest import LISTING1


def test_listing1_ast():
    ast = parse_prism(LISTING1)
    assert ast.kind == "mdp"
    assert ast.var_name == "s"
    assert (ast.var_low, ast.var_high, ast.var_init) == (0, 3, 0)
    assert len(ast.commands) == 5
    assert [c.action for c in ast.commands] == ["a0", "a1", "a0", "end",
                                                "end"]
    assert ast.commands[0].updates[0].prob == 0.7
    assert ast.commands[0].updates[0].value == 1
    assert [l.name for l in ast.labels] == ["survival", "death"]
    assert len(ast.rewards) == 1
    assert ast.rewards[0].value == 1.0


def test_listing1_build():
    m = build_explicit(parse_prism(LISTING1))
    assert m.n_states == 4
    assert m.initial_state == 0
    assert m.actions == ("a0", "a1", "end")
    assert m.enabled_actions(0) == [0, 1]
    assert m.enabled_actions(1) == [0]
    assert m.enabled_actions(2) == [2]
    assert m.enabled_actions(3) == [2]
    assert m.distribution(0, 0) == ((1, 0.7), (2, 0.3))
    assert m.distribution(2, 2) == ((2, 1.0),)
    assert m.labels["survival"] == frozenset({2})
    assert m.labels["death"] == frozenset({3})
    assert m.terminal_reward == {2: 1.0}
    assert validate_mdp(m) == []


def test_empty_module_body():
    with pytest.raises(ParseError, match="no commands"):
        parse_prism("mdp module m x : [0..1] init 0; endmodule")


def test_update_probabilities_must_sum():
    bad = """
    mdp
    module m
      x : [0..1] init 0;
      [a] x=0 -> 0.5:(x'=1) + 0.4:(x'=0);
      [b] x=1 -> 1.0:(x'=1);
    endmodule
    """
    with pytest.raises(ParseError, match="update probabilities sum to 0.9"):
        parse_prism(bad)


def test_syntax_error_reports_position():
    with pytest.raises(ParseError) as exc:
        parse_prism("mdp\nmodule m\n  x : [0..2 init 0;\nendmodule")
    msg = str(exc.value)
    assert "line 3" in msg and "column" in msg


def test_unsupported_constructs_named():
    with pytest.raises(ParseError, match="unsupported construct 'const'"):
        parse_prism("mdp const int k = 2; module m x : [0..1] init 0; "
                    "[a] true -> 1.0:(x'=1); endmodule")
    with pytest.raises(ParseError, match="multiple modules"):
        parse_prism("""
        mdp
        module m x : [0..1] init 0; [a] true -> 1.0:(x'=1); endmodule
        module n y : [0..1] init 0; [a] true -> 1.0:(y'=1); endmodule
        """)


def test_guard_validation():
    with pytest.raises(ParseError, match="initial value 5"):
        parse_prism("mdp module m x : [0..3] init 5; "
                    "[a] true -> 1.0:(x'=0); endmodule")
    with pytest.raises(ParseError, match="undeclared variable 'y'"):
        parse_prism("mdp module m x : [0..3] init 0; "
                    "[a] y=0 -> 1.0:(x'=0); endmodule")
    with pytest.raises(ParseError, match="outside"):
        parse_prism("mdp module m x : [0..3] init 0; "
                    "[a] x=0 -> 1.0:(x'=9); endmodule")


def test_deadlock_detection_names_state():
    src = """
    mdp
    module m
      x : [0..2] init 0;
      [a] x=0 -> 1.0:(x'=1);
      [b] x=2 -> 1.0:(x'=2);
    endmodule
    """
    with pytest.raises(ModelError, match="x=1"):
        build_explicit(parse_prism(src))


def test_guard_states_set_algebra():
    g = GuardOr(Comparison("x", "<=", 1),
                GuardAnd(Comparison("x", ">", 3), Comparison("x", "<", 5)))
    assert guard_states(g, 0, 6) == {0, 1, 4}
    assert guard_states(Comparison("x", "!=", 2), 0, 3) == {0, 1, 3}


def test_round_trip_pretty_print():
    ast = parse_prism(LISTING1)
    printed = pretty_print(ast)
    again = parse_prism(printed)
    assert again == ast
    assert pretty_print(again) == printed


def test_same_name_disjoint_guards_share_action_id():
    m = build_explicit(parse_prism(LISTING1))
    # Both `end` commands map to the single action id 2.
    assert m.actions.count("end") == 1
    assert m.enabled_actions(2) == m.enabled_actions(3) == [2]


def test_same_name_same_state_kept_distinct():
    src = """
    mdp
    module m
      x : [0..2] init 0;
      [go] x=0 -> 1.0:(x'=1);
      [go] x=0 -> 1.0:(x'=2);
      [stay] x>0 -> 1.0:(x'=2);
    endmodule
    """
    m = build_explicit(parse_prism(src))
    assert len(m.enabled_actions(0)) == 2
    names = {m.action_name(a) for a in m.enabled_actions(0)}
    assert "go" in names and len(names) == 2
    dists = {m.distribution(0, a) for a in m.enabled_actions(0)}
    assert dists == {((1, 1.0),), ((2, 1.0),)}


def test_unlabeled_command_gets_synthetic_name():
    src = """
    mdp
    module m
      x : [0..1] init 0;
      [] x=0 -> 1.0:(x'=1);
      [a] x=1 -> 1.0:(x'=1);
    endmodule
    """
    m = build_explicit(parse_prism(src))
    assert m.action_name(m.enabled_actions(0)[0]) == "__cmd0"


def test_dtmc_kind():
    src = """
    dtmc
    module m
      x : [0..1] init 0;
      [step] x=0 -> 0.5:(x'=0) + 0.5:(x'=1);
      [step] x=1 -> 1.0:(x'=1);
    endmodule
    label "done" = x=1;
    """
    m = build_explicit(parse_prism(src))
    d = to_dtmc(m)
    assert d.n_states == 2
    assert d.distribution(0) == ((0, 0.5), (1, 0.5))
    assert d.labels["done"] == frozenset({1})


def test_dtmc_kind_rejects_nondeterminism():
    src = """
    dtmc
    module m
      x : [0..1] init 0;
      [a] x=0 -> 1.0:(x'=1);
      [b] x=0 -> 1.0:(x'=0);
      [c] x=1 -> 1.0:(x'=1);
    endmodule
    """
    with pytest.raises(ModelError, match="nondeterministic"):
        build_explicit(parse_prism(src))


def test_to_dtmc_rejects_multi_action_mdp(listing1):
    with pytest.raises(ModelError, match="cannot view"):
        to_dtmc(listing1)


def test_comments_and_whitespace():
    src = LISTING1.replace("mdp", "mdp // model kind\n// a comment line")
    m = build_explicit(parse_prism(src))
    assert m.n_states == 4


def test_duplicate_update_targets_merge():
    src = """
    mdp
    module m
      x : [0..1] init 0;
      [a] x=0 -> 0.25:(x'=1) + 0.5:(x'=0) + 0.25:(x'=1);
      [a] x=1 -> 1.0:(x'=1);
    endmodule
    """
    m = build_explicit(parse_prism(src))
    assert m.distribution(0, 0) == ((0, 0.5), (1, 0.5))


def test_build_output_passes_validate_random_sources():
    import numpy as np
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(2, 6))
        lines = [f"  x : [0..{n - 1}] init 0;"]
        for s in range(n):
            k = int(rng.integers(1, 3))
            for a in range(k):
                t1, t2 = rng.integers(0, n, size=2)
                if t1 == t2:
                    lines.append(f"  [a{a}] x={s} -> 1.0:(x'={t1});")
                else:
                    lines.append(f"  [a{a}] x={s} -> 0.5:(x'={t1}) + "
                                 f"0.5:(x'={t2});")
        src = "mdp\nmodule m\n" + "\n".join(lines) + "\nendmodule\n"
        m = build_explicit(parse_prism(src))
        assert validate_mdp(m) == []
