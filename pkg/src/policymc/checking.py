"""Probability computation on explicit models.

MDP queries run qualitative graph precomputation (prob0/prob1 per
optimization direction), then Jacobi value iteration to sup-norm 1e-9,
then a policy-evaluation polish: the greedy scheduler is evaluated
exactly by a sparse linear solve and improved until stable, so reported
values carry solver-level accuracy rather than iteration-stop accuracy.

Chain queries solve the unknown states directly (sparse LU) up to
10,000 unknowns and fall back to Gauss-Seidel sweeps above that.
"""

import csv

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from . import kernels
from .errors import CheckError, ModelError
from .model import ExplicitDtmc, ExplicitMdp
from .pctl import format_property, path_masks

VI_TOL = 1e-9
VI_MAX_ITER = 10 ** 6
TIE_TOL = 1e-9
DIRECT_SOLVE_LIMIT = 10_000
POLISH_MAX_ROUNDS = 60


class CompiledMdp:
    """Flat CSR-style arrays for an ExplicitMdp.

    Choices are laid out per state in ascending action id; transitions
    keep their stored order.  Deadlock states are rejected here because
    every sweep assumes at least one choice per state.
    """

    def __init__(self, m):
        self.model = m
        n = m.n_states
        state_choice_start = np.zeros(n + 1, dtype=np.int64)
        choice_action = []
        choice_owner = []
        choice_tstart = [0]
        targets = []
        probs = []
        for s in range(n):
            enabled = m.enabled_actions(s)
            if not enabled:
                raise ModelError(f"state {s}: no enabled action (deadlock)")
            state_choice_start[s + 1] = state_choice_start[s] + len(enabled)
            for a in enabled:
                choice_action.append(a)
                choice_owner.append(s)
                for t, p in m.transitions[s][a]:
                    targets.append(t)
                    probs.append(p)
                choice_tstart.append(len(targets))
        self.n_states = n
        self.state_choice_start = state_choice_start
        self.choice_action = np.asarray(choice_action, dtype=np.int64)
        self.choice_owner = np.asarray(choice_owner, dtype=np.int64)
        self.choice_tstart = np.asarray(choice_tstart, dtype=np.int64)
        self.t_target = np.asarray(targets, dtype=np.int64)
        self.t_prob = np.asarray(probs, dtype=np.float64)
        self.n_choices = len(choice_action)

    def choices_of(self, s):
        return range(self.state_choice_start[s], self.state_choice_start[s + 1])

    def choice_index(self, s, action_id):
        lo = self.state_choice_start[s]
        hi = self.state_choice_start[s + 1]
        seg = self.choice_action[lo:hi]
        k = int(np.searchsorted(seg, action_id))
        if k >= seg.size or seg[k] != action_id:
            raise CheckError(f"action {action_id} not enabled in state {s}")
        return lo + k

    def choice_targets(self, c):
        return self.t_target[self.choice_tstart[c]:self.choice_tstart[c + 1]]

    def q_values(self, x):
        out = np.empty(self.n_choices, dtype=np.float64)
        kernels.q_values(self.choice_tstart, self.t_target, self.t_prob,
                         x, out)
        return out


# ---------------------------------------------------------------------------
# Segment reductions (per choice over its successors, per state over its
# choices); all graph precomputation is built from these.


def _choice_any(cm, member):
    vals = member[cm.t_target].astype(np.uint8)
    return np.maximum.reduceat(vals, cm.choice_tstart[:-1]) > 0


def _choice_all(cm, member):
    vals = member[cm.t_target].astype(np.uint8)
    return np.minimum.reduceat(vals, cm.choice_tstart[:-1]) > 0


def _state_any(cm, choice_mask):
    vals = choice_mask.astype(np.uint8)
    return np.maximum.reduceat(vals, cm.state_choice_start[:-1]) > 0


def _state_all(cm, choice_mask):
    vals = choice_mask.astype(np.uint8)
    return np.minimum.reduceat(vals, cm.state_choice_start[:-1]) > 0


def _state_best(cm, q, maximize):
    if maximize:
        return np.maximum.reduceat(q, cm.state_choice_start[:-1])
    return np.minimum.reduceat(q, cm.state_choice_start[:-1])


def _choice_min_level(cm, level):
    """Per choice, the smallest successor level; unleveled counts as inf."""
    lvl = level[cm.t_target].astype(np.float64)
    lvl[lvl < 0] = np.inf
    return np.minimum.reduceat(lvl, cm.choice_tstart[:-1])


# ---------------------------------------------------------------------------
# Qualitative precomputation.  All four are pure graph fixed points; no
# probabilities are read.


def prob0_max(cm, phi1, phi2):
    """States with Pmax(phi1 U phi2) = 0: cannot reach phi2 through phi1."""
    reach = phi2.copy()
    while True:
        hit = _state_any(cm, _choice_any(cm, reach))
        new = phi2 | (phi1 & hit)
        if np.array_equal(new, reach):
            return ~reach
        reach = new


def prob1_max(cm, phi1, phi2):
    """States with Pmax(phi1 U phi2) = 1 (greatest/least fixed point)."""
    x = np.ones(cm.n_states, dtype=bool)
    body = phi1 & ~phi2
    while True:
        all_in_x = _choice_all(cm, x)
        y = phi2.copy()
        while True:
            ok = all_in_x & _choice_any(cm, y)
            new = phi2 | (body & _state_any(cm, ok))
            if np.array_equal(new, y):
                break
            y = new
        if np.array_equal(y, x):
            return x
        x = y


def prob0_min(cm, phi1, phi2):
    """States with Pmin(phi1 U phi2) = 0: some resolution avoids phi2."""
    forced = phi2.copy()
    body = phi1 & ~phi2
    while True:
        hit = _state_all(cm, _choice_any(cm, forced))
        new = phi2 | (body & hit)
        if np.array_equal(new, forced):
            return ~forced
        forced = new


def prob1_min(cm, phi1, phi2):
    """States with Pmin(phi1 U phi2) = 1: every resolution hits phi2."""
    x = np.ones(cm.n_states, dtype=bool)
    body = phi1 & ~phi2
    while True:
        all_in_x = _choice_all(cm, x)
        y = phi2.copy()
        while True:
            ok = all_in_x & _choice_any(cm, y)
            new = phi2 | (body & _state_all(cm, ok))
            if np.array_equal(new, y):
                break
            y = new
        if np.array_equal(y, x):
            return x
        x = y


def _prob01(cm, phi1, phi2, maximize):
    """(yes, no) boolean vectors for the given optimization direction."""
    if maximize:
        no = prob0_max(cm, phi1, phi2)
        yes = prob1_max(cm, phi1, phi2)
    else:
        no = prob0_min(cm, phi1, phi2)
        yes = prob1_min(cm, phi1, phi2)
    return yes, no


def prob01_sets(model, path, maximize=True):
    """Qualitative precomputation on a model: states reaching the target
    with probability one / zero under the best (or worst) scheduler.

    `path` is an Eventually/Until path formula, or a prepared
    (phi1, phi2) boolean-mask pair.
    """
    if isinstance(model, CompiledMdp):
        cm = model
        labels, n = None, model.n_states
    elif isinstance(model, ExplicitMdp):
        cm = CompiledMdp(model)
        labels, n = model.labels, model.n_states
    else:
        cm = CompiledMdp(model.as_mdp())
        labels, n = model.labels, model.n_states
    if isinstance(path, tuple):
        phi1, phi2 = path
        phi1 = np.asarray(phi1, dtype=bool)
        phi2 = np.asarray(phi2, dtype=bool)
    else:
        if labels is None:
            raise CheckError(
                "prob01_sets on a compiled model needs mask arguments")
        phi1, phi2 = path_masks(path, labels, n)
    return _prob01(cm, phi1, phi2, maximize)


# ---------------------------------------------------------------------------
# Result container


class CheckResult:
    """Values and bookkeeping from one check_* call.

    values is the full per-state vector (clamped to [0,1]); stats carries
    raw residuals and method details.
    """

    def __init__(self, formula, values, initial_state, yes_mask, no_mask,
                 stats, phi1, phi2, compiled=None):
        self.formula = formula
        self.values = values
        self.initial_state = initial_state
        self.initial_value = float(values[initial_state])
        self.yes_mask = yes_mask
        self.no_mask = no_mask
        self.stats = stats
        self.phi1 = phi1
        self.phi2 = phi2
        self._compiled = compiled
        self.verdict = None
        if formula is not None and formula.bound is not None:
            op, p = formula.bound
            v = self.initial_value
            self.verdict = bool({"<": v < p, "<=": v <= p,
                                 ">=": v >= p, ">": v > p}[op])

    @property
    def direction(self):
        return self.formula.direction if self.formula is not None else None

    def __repr__(self):
        head = format_property(self.formula) if self.formula else "?"
        return f"CheckResult({head} = {self.initial_value:.6f})"


# ---------------------------------------------------------------------------
# Exact scheduler evaluation (used by the polish and by tests)


def _reaches_under(cm, unknown, chosen, yes_mask):
    """Unknown states that reach a yes-state following chosen choices."""
    reach_mask = np.zeros(cm.n_states, dtype=bool)
    preds = {}
    seeds = []
    for s in unknown:
        c = chosen[s]
        hit = False
        for t in cm.choice_targets(c):
            t = int(t)
            if yes_mask[t]:
                hit = True
            else:
                preds.setdefault(t, []).append(int(s))
        if hit:
            seeds.append(int(s))
    stack = seeds
    for s in stack:
        reach_mask[s] = True
    while stack:
        t = stack.pop()
        for s in preds.get(t, ()):
            if not reach_mask[s]:
                reach_mask[s] = True
                stack.append(s)
    return reach_mask


def eval_scheduler(cm, unknown, chosen, yes_mask, x_out):
    """Exact reachability value of a fixed scheduler on the unknown states.

    Least-fixed-point semantics: unknown states that cannot reach a
    yes-state under the scheduler get value 0; the rest solve a sparse
    linear system.  Writes into x_out and returns it.
    """
    if len(unknown) == 0:
        return x_out
    reach_mask = _reaches_under(cm, unknown, chosen, yes_mask)
    solve_states = [int(s) for s in unknown if reach_mask[s]]
    for s in unknown:
        if not reach_mask[s]:
            x_out[s] = 0.0
    if not solve_states:
        return x_out
    index = {s: i for i, s in enumerate(solve_states)}
    rows, cols, data = [], [], []
    b = np.zeros(len(solve_states), dtype=np.float64)
    for i, s in enumerate(solve_states):
        rows.append(i)
        cols.append(i)
        data.append(1.0)
        c = chosen[s]
        for k in range(cm.choice_tstart[c], cm.choice_tstart[c + 1]):
            t = int(cm.t_target[k])
            p = float(cm.t_prob[k])
            if yes_mask[t]:
                b[i] += p
            elif t in index:
                rows.append(i)
                cols.append(index[t])
                data.append(-p)
    a = scipy.sparse.csc_matrix(
        (data, (rows, cols)),
        shape=(len(solve_states), len(solve_states)))
    sol = scipy.sparse.linalg.spsolve(a, b)
    sol = np.atleast_1d(sol)
    for i, s in enumerate(solve_states):
        x_out[s] = float(sol[i])
    return x_out


# ---------------------------------------------------------------------------
# Tie sets and progress-levelled selection


def _tie_mask(cm, q, maximize, tol):
    best = _state_best(cm, q, maximize)
    return np.abs(q - best[cm.choice_owner]) <= tol


def _level_selection(cm, candidate_mask, region_mask, base_mask):
    """BFS levels from base_mask through candidate choices of region
    states.  Returns (level array, chosen choice per region state, ok).

    A region state's level is the BFS round at which some candidate
    choice first sees a levelled successor; its chosen choice is the
    lowest-id candidate making that progress.  ok is False when some
    region state never levels (callers fall back and report).
    """
    n = cm.n_states
    level = np.full(n, -1, dtype=np.int64)
    level[base_mask] = 0
    reached = base_mask.copy()
    pending = region_mask & ~reached
    k = 0
    while pending.any():
        k += 1
        hit = candidate_mask & _choice_any(cm, reached)
        newly = pending & _state_any(cm, hit)
        if not newly.any():
            break
        level[newly] = k
        reached = reached | newly
        pending = pending & ~newly
    chosen = np.full(n, -1, dtype=np.int64)
    min_lvl = _choice_min_level(cm, level)
    for s in np.flatnonzero(region_mask & (level > 0)):
        lo = cm.state_choice_start[s]
        hi = cm.state_choice_start[s + 1]
        for c in range(lo, hi):
            if candidate_mask[c] and min_lvl[c] < level[s]:
                chosen[s] = c
                break
    ok = not pending.any()
    return level, chosen, ok


def _greedy_levelled(cm, x, unknown_mask, yes_mask, no_mask, maximize, tol):
    """Greedy scheduler choice per unknown state: tied within tol to the
    optimal backup, preferring choices that progress toward the decided
    region (so value-preserving cycles are never selected)."""
    q = cm.q_values(x)
    tied = _tie_mask(cm, q, maximize, tol)
    base = yes_mask | no_mask
    level, chosen, ok = _level_selection(cm, tied, unknown_mask, base)
    if not ok:
        # Fall back to the lowest-id tied choice for unlevelled states.
        for s in np.flatnonzero(unknown_mask & (chosen < 0)):
            lo = cm.state_choice_start[s]
            hi = cm.state_choice_start[s + 1]
            for c in range(lo, hi):
                if tied[c]:
                    chosen[s] = c
                    break
    return chosen, ok


def _polish(cm, unknown, x, yes_mask, no_mask, maximize):
    """Howard-style improvement: evaluate the levelled greedy scheduler
    exactly, re-greedy, repeat until the scheduler stabilizes."""
    if len(unknown) == 0:
        return x, 0, True
    unknown_mask = np.zeros(cm.n_states, dtype=bool)
    unknown_mask[unknown] = True
    prev_chosen = None
    rounds = 0
    levelled = True
    for rounds in range(1, POLISH_MAX_ROUNDS + 1):
        chosen, ok = _greedy_levelled(cm, x, unknown_mask, yes_mask,
                                      no_mask, maximize, TIE_TOL)
        levelled = levelled and ok
        if prev_chosen is not None and np.array_equal(chosen, prev_chosen):
            return x, rounds, levelled
        x = eval_scheduler(cm, unknown, chosen, yes_mask, x.copy())
        prev_chosen = chosen
    return x, rounds, False


# ---------------------------------------------------------------------------
# Checking entry points


def check_mdp(m, f, compiled=None):
    """Optimal reachability/until probabilities on an MDP.

    The query must carry a direction (max or min).  Returns a CheckResult
    with the full optimal value vector.
    """
    if f.direction not in ("max", "min"):
        raise CheckError(
            f"MDP query needs an optimization direction (Pmax or Pmin): "
            f"{format_property(f)}")
    maximize = f.direction == "max"
    cm = compiled if compiled is not None else CompiledMdp(m)
    phi1, phi2 = path_masks(f.path, m.labels, m.n_states)
    yes, no = _prob01(cm, phi1, phi2, maximize)
    x = np.zeros(m.n_states, dtype=np.float64)
    x[yes] = 1.0
    unknown = np.flatnonzero(~yes & ~no).astype(np.int64)
    iters, delta = kernels.vi_run(
        cm.state_choice_start, cm.choice_tstart, cm.t_target, cm.t_prob,
        unknown, x, maximize, VI_TOL, VI_MAX_ITER)
    if iters >= VI_MAX_ITER and delta >= VI_TOL:
        raise CheckError(
            f"value iteration hit the {VI_MAX_ITER} sweep cap, "
            f"residual {delta:.3e}")
    x, rounds, converged = _polish(cm, unknown, x, yes, no, maximize)
    stats = {
        "method": "value-iteration+policy-polish",
        "kernel_backend": kernels.BACKEND,
        "unknown_states": int(unknown.size),
        "vi_iterations": int(iters),
        "vi_residual": float(delta),
        "polish_rounds": int(rounds),
        "polish_converged": bool(converged),
    }
    values = np.clip(x, 0.0, 1.0)
    return CheckResult(f, values, m.initial_state, yes, no, stats,
                       phi1, phi2, compiled=cm)


def check_dtmc(d, f, compiled=None):
    """Reachability/until probability on a Markov chain.

    The query must not carry a direction.  Unknown states are solved
    directly while they number at most 10,000, iteratively above that.
    """
    if f.direction is not None:
        raise CheckError(
            f"max/min query on a Markov chain: {format_property(f)}")
    if isinstance(d, ExplicitMdp):
        raise CheckError("check_dtmc needs a Markov chain, got an MDP")
    cm = compiled if compiled is not None else CompiledMdp(d.as_mdp())
    phi1, phi2 = path_masks(f.path, d.labels, d.n_states)
    # One choice per state, so the max and min characterizations agree.
    yes, no = _prob01(cm, phi1, phi2, True)
    x = np.zeros(d.n_states, dtype=np.float64)
    x[yes] = 1.0
    unknown = np.flatnonzero(~yes & ~no).astype(np.int64)
    stats = {
        "unknown_states": int(unknown.size),
        "kernel_backend": kernels.BACKEND,
    }
    if unknown.size <= DIRECT_SOLVE_LIMIT:
        chosen = cm.state_choice_start[:-1]
        eval_scheduler(cm, unknown, chosen, yes, x)
        stats["method"] = "direct-sparse-lu"
    else:
        iters, delta = kernels.dtmc_gs_run(
            cm.choice_tstart, cm.t_target, cm.t_prob, unknown, x,
            VI_TOL, VI_MAX_ITER)
        if iters >= VI_MAX_ITER and delta >= VI_TOL:
            raise CheckError(
                f"iterative chain solve hit the {VI_MAX_ITER} sweep cap, "
                f"residual {delta:.3e}")
        stats["method"] = "gauss-seidel"
        stats["gs_iterations"] = int(iters)
        stats["gs_residual"] = float(delta)
    values = np.clip(x, 0.0, 1.0)
    return CheckResult(f, values, d.initial_state, yes, no, stats,
                       phi1, phi2, compiled=cm)


# ---------------------------------------------------------------------------
# Scheduler extraction and optimal action sets


def _as_result(m, f_or_result):
    """Accept either a directed formula (checked here) or a finished
    CheckResult."""
    if isinstance(f_or_result, CheckResult):
        return f_or_result
    if f_or_result is None:
        raise CheckError("need a formula or a check result")
    return check_mdp(m, f_or_result)


def optimal_action_sets(m, f_or_result, epsilon=1e-6):
    """Per state, the action ids whose one-step backup lies within epsilon
    of the state's optimal backup.  Never empty."""
    result = _as_result(m, f_or_result)
    cm = result._compiled if result._compiled is not None else CompiledMdp(m)
    q = cm.q_values(result.values)
    tied = _tie_mask(cm, q, result.direction != "min", epsilon)
    out = {}
    for s in range(cm.n_states):
        lo = cm.state_choice_start[s]
        hi = cm.state_choice_start[s + 1]
        ids = tuple(int(cm.choice_action[c]) for c in range(lo, hi)
                    if tied[c])
        out[s] = ids
    return out


def progress_action_sets(m, f_or_result, epsilon=TIE_TOL):
    """Per state, the tied action ids that also make progress toward the
    decided region, so following any of them forever is optimal.

    On yes-states (outside the target set) the candidates are choices
    staying inside the yes-region; on no-states they are all tied choices
    for a max query and the choices staying inside the no-region for a
    min query (leaving it would pick up probability mass).
    """
    result = _as_result(m, f_or_result)
    cm = result._compiled if result._compiled is not None else CompiledMdp(m)
    maximize = result.direction != "min"
    q = cm.q_values(result.values)
    tied = _tie_mask(cm, q, maximize, epsilon)
    yes, no = result.yes_mask, result.no_mask
    phi2 = result.phi2
    unknown_mask = ~yes & ~no
    out = {}

    # Unknown region: tied choices levelled toward yes|no.
    lvl_u, _, ok_u = _level_selection(cm, tied, unknown_mask, yes | no)
    min_u = _choice_min_level(cm, lvl_u)
    # Yes region outside phi2: stay inside yes, levelled toward phi2.
    stay_yes = _choice_all(cm, yes)
    lvl_y, _, ok_y = _level_selection(cm, stay_yes, yes & ~phi2, phi2 & yes)
    min_y = _choice_min_level(cm, lvl_y)
    stay_no = _choice_all(cm, no)

    for s in range(cm.n_states):
        lo = cm.state_choice_start[s]
        hi = cm.state_choice_start[s + 1]
        if phi2[s]:
            ids = [c for c in range(lo, hi) if tied[c]]
        elif yes[s]:
            ids = [c for c in range(lo, hi)
                   if stay_yes[c] and lvl_y[s] > 0 and min_y[c] < lvl_y[s]]
            if not ids:
                ids = [c for c in range(lo, hi) if tied[c]]
        elif no[s]:
            if maximize:
                ids = [c for c in range(lo, hi) if tied[c]]
            else:
                ids = [c for c in range(lo, hi) if stay_no[c]]
                if not ids:
                    ids = [c for c in range(lo, hi) if tied[c]]
        else:
            ids = [c for c in range(lo, hi)
                   if tied[c] and lvl_u[s] > 0 and min_u[c] < lvl_u[s]]
            if not ids:
                ids = [c for c in range(lo, hi) if tied[c]]
        out[s] = tuple(int(cm.choice_action[c]) for c in ids)
    return out


def extract_scheduler(m, f_or_result):
    """Deterministic optimal scheduler as {state: action id}.

    Per state the lowest-id progress-safe tied action; inducing this
    scheduler and checking the chain reproduces the optimum.
    """
    result = _as_result(m, f_or_result)
    if result.values is None:
        raise CheckError("extract_scheduler called before values computed")
    progress = progress_action_sets(m, result)
    return {s: ids[0] for s, ids in progress.items()}


# ---------------------------------------------------------------------------
# Exports


def save_scheduler_csv(path, m, scheduler):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "action_id", "action_name"])
        for s in sorted(scheduler):
            a = scheduler[s]
            w.writerow([s, a, m.actions[a]])


def save_values_csv(path, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "value"])
        for s, v in enumerate(values):
            w.writerow([s, repr(float(v))])
