import pytest

from policymc import (FormatError, TabularMdpInput, convert_tabular,
                      load_tabular, parse_prism, pretty_print, validate_mdp)

TRANSITIONS = [
    (0, 0, 1, 0.5), (0, 0, 2, 0.5),
    (0, 1, 2, 1.0),
    (1, 0, 2, 0.25), (1, 0, 3, 0.75),
]
INITIAL = [(0, 0.6), (1, 0.4)]
NAMES = {0: "treat", 1: "wait"}


def small_input():
    return TabularMdpInput(TRANSITIONS, INITIAL, NAMES,
                           survived={2}, died={3})


def test_validation_rejects_bad_sums():
    with pytest.raises(FormatError, match="sum"):
        TabularMdpInput([(0, 0, 1, 0.5), (0, 0, 2, 0.4)], [(1, 1.0)],
                        NAMES, {1}, {2})
    with pytest.raises(FormatError, match="initial"):
        TabularMdpInput(TRANSITIONS, [(0, 0.5)], NAMES, {2}, {3})
    with pytest.raises(FormatError, match="both survived and died"):
        TabularMdpInput(TRANSITIONS, INITIAL, NAMES, {2}, {2, 3})


def test_convert_builds_aux_initial():
    inp = small_input()
    ast, m = convert_tabular(inp)
    # 4 clinical states + auxiliary initial.
    assert m.n_states == 5
    assert m.initial_state == 4
    admit = m.actions.index("admit")
    assert m.enabled_actions(4) == [admit]
    assert m.distribution(4, admit) == ((0, 0.6), (1, 0.4))
    end = m.actions.index("end")
    assert m.distribution(2, end) == ((2, 1.0),)
    assert m.distribution(3, end) == ((3, 1.0),)
    assert m.labels["survived"] == frozenset({2})
    assert m.labels["died"] == frozenset({3})
    assert m.terminal_reward == {2: 1.0}
    assert validate_mdp(m) == []


def test_convert_action_names_shared_across_states():
    _, m = convert_tabular(small_input())
    treat = m.actions.index("treat")
    assert treat in m.enabled_actions(0)
    assert treat in m.enabled_actions(1)
    assert m.distribution(0, treat) == ((1, 0.5), (2, 0.5))
    assert m.distribution(1, treat) == ((2, 0.25), (3, 0.75))


def test_convert_round_trips_through_text():
    ast, _ = convert_tabular(small_input())
    assert parse_prism(pretty_print(ast)) == ast


def test_convert_preserves_probabilities_exactly():
    probs = [0.1234567890123456, 1.0 - 0.1234567890123456]
    inp = TabularMdpInput(
        [(0, 0, 1, probs[0]), (0, 0, 2, probs[1])],
        [(0, 1.0)], {0: "go"}, {1}, {2})
    ast, m = convert_tabular(inp)
    go = m.actions.index("go")
    assert dict(m.distribution(0, go))[1] == probs[0]
    assert dict(m.distribution(0, go))[2] == probs[1]
    # And bit-exactly through the printed text.
    again = parse_prism(pretty_print(ast))
    assert again == ast


def test_convert_errors():
    with pytest.raises(FormatError, match="no terminal states"):
        convert_tabular(TabularMdpInput(TRANSITIONS, INITIAL, NAMES,
                                        set(), set()))
    with pytest.raises(FormatError, match="initial distribution is empty"):
        convert_tabular(TabularMdpInput(TRANSITIONS, [], NAMES, {2}, {3}))
    with pytest.raises(FormatError, match="unknown state 999"):
        convert_tabular(TabularMdpInput(
            TRANSITIONS + [(1, 1, 999, 1.0)], INITIAL, NAMES, {2}, {3}))
    with pytest.raises(FormatError, match="not contiguous: missing \\[2, 3\\]"):
        convert_tabular(TabularMdpInput(
            [(0, 0, 1, 1.0), (1, 0, 4, 1.0), (4, 0, 1, 1.0)],
            [(0, 1.0)], NAMES, {1}, set()))
    with pytest.raises(FormatError, match="terminal state 2 has outgoing"):
        convert_tabular(TabularMdpInput(
            TRANSITIONS + [(2, 0, 3, 1.0)], INITIAL, NAMES, {2}, {3}))
    with pytest.raises(FormatError, match="no name for action id 1"):
        convert_tabular(TabularMdpInput(TRANSITIONS, INITIAL, {0: "treat"},
                                        {2}, {3}))
    with pytest.raises(FormatError, match="no transitions"):
        convert_tabular(TabularMdpInput(
            [(0, 0, 1, 1.0)], [(0, 0.5), (2, 0.5)], NAMES, {1}, set()))


def test_load_tabular(tmp_path):
    t = tmp_path / "t.csv"
    t.write_text("state,action,next_state,prob\n"
                 "0,0,1,0.5\n0,0,2,0.5\n0,1,2,1.0\n"
                 "1,0,2,0.25\n1,0,3,0.75\n")
    i = tmp_path / "i.csv"
    i.write_text("state,prob\n0,0.6\n1,0.4\n")
    meta = tmp_path / "m.csv"
    meta.write_text("kind,id,name\naction,0,treat\naction,1,wait\n"
                    "survived,2,\ndied,3,\n")
    inp = load_tabular(str(t), str(i), str(meta))
    assert inp.action_names == {0: "treat", 1: "wait"}
    assert inp.survived == frozenset({2})
    assert inp.died == frozenset({3})
    ast, m = convert_tabular(inp)
    assert m.n_states == 5

    bad = tmp_path / "bad.csv"
    bad.write_text("state,prob\n0,1.0\n")
    with pytest.raises(FormatError, match="expected header"):
        load_tabular(str(bad), str(i), str(meta))
    dup = tmp_path / "dup.csv"
    dup.write_text("kind,id,name\naction,0,a\naction,0,b\n")
    with pytest.raises(FormatError, match="duplicate action id 0"):
        load_tabular(str(t), str(i), str(dup))
    unk = tmp_path / "unk.csv"
    unk.write_text("kind,id,name\nwhatever,0,a\n")
    with pytest.raises(FormatError, match="unknown kind"):
        load_tabular(str(t), str(i), str(unk))
