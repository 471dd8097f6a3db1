import numpy as np
import pytest

import policymc.checking as checking
from policymc import (CheckError, ExplicitDtmc, ExplicitMdp, TabularPolicy,
                      check_dtmc, check_mdp, extract_scheduler, induce,
                      optimal_action_sets, parse_property, prob01_sets,
                      progress_action_sets)
from policymc.pctl import FALSE, Atom, Eventually, Until

from conftest import (brute_force_optimum, chain_reach_exact,
                      enumerate_schedulers, label_masks, one_hot_table,
                      random_mdp, scheduler_rows)

PMAX = parse_property('Pmax=? [ F "survival" ]')
PMIN = parse_property('Pmin=? [ F "survival" ]')


def test_listing1_pmax(listing1):
    r = check_mdp(listing1, PMAX)
    assert r.initial_value == pytest.approx(0.86, abs=1e-9)
    assert r.values[1] == pytest.approx(0.8, abs=1e-9)
    assert r.values[2] == 1.0 and r.values[3] == 0.0


def test_listing1_pmin(listing1):
    r = check_mdp(listing1, PMIN)
    assert r.initial_value == pytest.approx(0.32, abs=1e-9)


def test_check_mdp_requires_direction(listing1):
    with pytest.raises(CheckError, match="direction"):
        check_mdp(listing1, parse_property('P=? [ F "survival" ]'))


def test_unresolved_label(listing1):
    with pytest.raises(CheckError, match="unresolved label"):
        check_mdp(listing1, parse_property('Pmax=? [ F "nope" ]'))


def test_prob01_listing1(listing1):
    yes, no = prob01_sets(listing1, Eventually(Atom("survival")), True)
    assert set(np.flatnonzero(yes)) == {2}
    assert set(np.flatnonzero(no)) == {3}
    yes, no = prob01_sets(listing1, Eventually(Atom("survival")), False)
    assert set(np.flatnonzero(yes)) == {2}
    assert set(np.flatnonzero(no)) == {3}


def test_prob01_trivial_shapes(listing1):
    # Eventually(true): everything is a yes-state.
    from policymc.pctl import TRUE
    yes, no = prob01_sets(listing1, Eventually(TRUE), True)
    assert yes.all() and not no.any()
    # Until(false, target): exactly the target has probability one.
    yes, no = prob01_sets(listing1, Until(FALSE, Atom("survival")), True)
    assert set(np.flatnonzero(yes)) == {2}
    assert set(np.flatnonzero(~yes)) == set(np.flatnonzero(no))


def test_check_dtmc_listing1_induced(listing1):
    sched = extract_scheduler(listing1, PMAX)
    chain = induce(listing1, TabularPolicy(sched)).chain
    v = check_dtmc(chain, parse_property('P=? [ F "survival" ]'))
    assert v.initial_value == pytest.approx(0.86, abs=1e-9)
    d = check_dtmc(chain, parse_property('P=? [ F "death" ]'))
    assert d.initial_value == pytest.approx(0.14, abs=1e-9)
    t = check_dtmc(chain, parse_property('P=? [ F "true" ]'))
    assert t.initial_value == 1.0


def test_check_dtmc_rejects_mdp_and_directed(listing1):
    with pytest.raises(CheckError, match="Markov chain"):
        check_dtmc(listing1, parse_property('P=? [ F "survival" ]'))
    d = ExplicitDtmc(1, 0, [((0, 1.0),)], {"x": frozenset({0})})
    with pytest.raises(CheckError, match="max/min"):
        check_dtmc(d, parse_property('Pmax=? [ F "x" ]'))


def test_threshold_verdicts(listing1):
    sat = check_mdp(listing1, parse_property('Pmax>=0.8 [ F "survival" ]'))
    assert sat.verdict is True
    unsat = check_mdp(listing1, parse_property('Pmax>=0.9 [ F "survival" ]'))
    assert unsat.verdict is False
    value = check_mdp(listing1, PMAX)
    assert value.verdict is None


def test_extract_scheduler_listing1(listing1):
    assert extract_scheduler(listing1, PMAX) == {0: 0, 1: 0, 2: 2, 3: 2}
    assert extract_scheduler(listing1, PMIN)[0] == 1


def test_extract_scheduler_tie_breaks_lowest_id():
    dist = ((1, 0.5), (2, 0.5))
    m = ExplicitMdp(3, 0, ("a", "b"),
                    [{0: dist, 1: dist},
                     {0: ((1, 1.0),)},
                     {0: ((2, 1.0),)}],
                    {"goal": frozenset({1})})
    sched = extract_scheduler(m, parse_property('Pmax=? [ F "goal" ]'))
    assert sched[0] == 0


def test_optimal_action_sets_listing1(listing1):
    sets = optimal_action_sets(listing1, PMAX)
    assert sets[0] == (0,)
    assert sets[1] == (0,)
    assert sets[2] == (2,) and sets[3] == (2,)
    # Vacuous tolerance admits every enabled action.
    loose = optimal_action_sets(listing1, PMAX, epsilon=1.0)
    assert loose[0] == (0, 1)


def test_optimal_action_sets_identical_actions():
    dist = ((1, 0.7), (2, 0.3))
    m = ExplicitMdp(3, 0, ("a", "b"),
                    [{0: dist, 1: dist},
                     {0: ((1, 1.0),)},
                     {0: ((2, 1.0),)}],
                    {"goal": frozenset({1})})
    sets = optimal_action_sets(m, parse_property('Pmax=? [ F "goal" ]'))
    assert sets[0] == (0, 1)


def test_values_clamped_and_stats(listing1):
    r = check_mdp(listing1, PMAX)
    assert np.all(r.values >= 0.0) and np.all(r.values <= 1.0)
    assert r.stats["method"] == "value-iteration+policy-polish"
    assert r.stats["kernel_backend"] in ("pure", "compiled")
    assert r.stats["polish_converged"] is True
    assert "vi_iterations" in r.stats and "vi_residual" in r.stats


def test_dtmc_direct_and_iterative_agree(listing1, monkeypatch):
    sched = extract_scheduler(listing1, PMAX)
    chain = induce(listing1, TabularPolicy(sched)).chain
    f = parse_property('P=? [ F "survival" ]')
    direct = check_dtmc(chain, f)
    assert direct.stats["method"] == "direct-sparse-lu"
    monkeypatch.setattr(checking, "DIRECT_SOLVE_LIMIT", 0)
    iterative = check_dtmc(chain, f)
    assert iterative.stats["method"] == "gauss-seidel"
    assert iterative.initial_value == pytest.approx(direct.initial_value,
                                                    abs=1e-9)


def test_brute_force_equivalence_reachability():
    rng = np.random.default_rng(2024)
    f_max = parse_property('Pmax=? [ F "goal" ]')
    f_min = parse_property('Pmin=? [ F "goal" ]')
    for _ in range(40):
        m = random_mdp(rng)
        phi1, phi2 = label_masks(m, "goal")
        for f, maximize in ((f_max, True), (f_min, False)):
            want = brute_force_optimum(m, phi1, phi2, maximize)
            got = check_mdp(m, f).values
            assert np.max(np.abs(got - want)) < 1e-9


def test_brute_force_equivalence_until():
    rng = np.random.default_rng(77)
    f_max = parse_property('Pmax=? [ ! "sink" U "goal" ]')
    f_min = parse_property('Pmin=? [ ! "sink" U "goal" ]')
    for _ in range(25):
        m = random_mdp(rng)
        n = m.n_states
        phi2 = np.zeros(n, dtype=bool)
        phi2[list(m.states_with_label("goal"))] = True
        phi1 = np.ones(n, dtype=bool)
        phi1[list(m.states_with_label("sink"))] = False
        for f, maximize in ((f_max, True), (f_min, False)):
            want = brute_force_optimum(m, phi1, phi2, maximize)
            got = check_mdp(m, f).values
            assert np.max(np.abs(got - want)) < 1e-9


def test_prob01_match_brute_force():
    rng = np.random.default_rng(5150)
    for _ in range(40):
        m = random_mdp(rng)
        phi1, phi2 = label_masks(m, "goal")
        for maximize in (True, False):
            want = brute_force_optimum(m, phi1, phi2, maximize)
            yes, no = prob01_sets(m, (phi1, phi2), maximize)
            assert np.all(want[yes] > 1.0 - 1e-12)
            assert np.all(want[no] < 1e-12)
            # Exactness: no decided state was missed.
            assert np.all(want[~yes & ~no] < 1.0 - 1e-12)
            assert np.all(want[~yes & ~no] > 1e-12)


def test_scheduler_induction_fidelity():
    rng = np.random.default_rng(31337)
    f_max = parse_property('Pmax=? [ F "goal" ]')
    f_min = parse_property('Pmin=? [ F "goal" ]')
    chain_f = parse_property('P=? [ F "goal" ]')
    for _ in range(40):
        m = random_mdp(rng)
        for f in (f_max, f_min):
            r = check_mdp(m, f)
            sched = extract_scheduler(m, r)
            chain = induce(m, TabularPolicy(sched)).chain
            v = check_dtmc(chain, chain_f).initial_value
            assert abs(v - r.initial_value) < 1e-6


def test_progress_sets_subset_of_tied():
    rng = np.random.default_rng(404)
    f = parse_property('Pmax=? [ F "goal" ]')
    for _ in range(20):
        m = random_mdp(rng)
        r = checking.check_mdp(m, f)
        tied = optimal_action_sets(m, r, epsilon=checking.TIE_TOL)
        prog = progress_action_sets(m, r)
        for s in range(m.n_states):
            assert prog[s]
            assert set(prog[s]) <= set(tied[s])


def test_duality_on_absorbing_partition():
    rng = np.random.default_rng(909)
    f_goal = parse_property('P=? [ F "goal" ]')
    f_sink = parse_property('P=? [ F "sink" ]')
    for _ in range(25):
        m = random_mdp(rng)
        for sched in (dict((s, m.enabled_actions(s)[0])
                           for s in range(m.n_states)),
                      dict((s, m.enabled_actions(s)[-1])
                           for s in range(m.n_states))):
            chain = induce(m, TabularPolicy(sched)).chain
            a = check_dtmc(chain, f_goal).initial_value
            b = check_dtmc(chain, f_sink).initial_value
            assert abs(a + b - 1.0) < 1e-9


def test_until_monotone_in_phi1():
    rng = np.random.default_rng(616)
    for _ in range(15):
        m = random_mdp(rng)
        n = m.n_states
        phi2 = np.zeros(n, dtype=bool)
        phi2[n - 2] = True
        small = rng.random(n) < 0.5
        big = small | (rng.random(n) < 0.5)
        lo = brute_force_optimum(m, small, phi2, True)
        hi = brute_force_optimum(m, big, phi2, True)
        assert np.all(hi >= lo - 1e-12)
        # And the checker agrees with the oracle on both.
        labels = dict(m.labels)
        labels["p1"] = frozenset(np.flatnonzero(small).tolist())
        got = check_mdp(m.with_labels(labels),
                        parse_property('Pmax=? [ "p1" U "goal" ]')).values
        assert np.max(np.abs(got - lo)) < 1e-9


def test_sandwich_quick():
    rng = np.random.default_rng(1234)
    chain_f = parse_property('P=? [ F "goal" ]')
    for _ in range(10):
        m = random_mdp(rng)
        lo = check_mdp(m, parse_property('Pmin=? [ F "goal" ]')).initial_value
        hi = check_mdp(m, parse_property('Pmax=? [ F "goal" ]')).initial_value
        for _ in range(20):
            sched = {s: int(rng.choice(m.enabled_actions(s)))
                     for s in range(m.n_states)}
            v = check_dtmc(induce(m, TabularPolicy(sched)).chain,
                           chain_f).initial_value
            assert lo - 1e-6 <= v <= hi + 1e-6
