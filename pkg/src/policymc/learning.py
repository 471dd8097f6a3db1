"""Policy training: behavioral cloning and shield-guarded fine-tuning.

The shield wraps the admissible-action sets of an optimality query; at
execution time an inadmissible action is replaced by one that is both
tied-optimal and progressing toward the decided region.  Fine-tuning
aggregates the executed (observation, action) pairs and periodically
retrains the net on them, so the learner only ever imitates actions the
shield allowed.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .checking import (TIE_TOL, check_mdp, optimal_action_sets,
                       progress_action_sets)
from .errors import CheckError, FormatError, InternalError, PolicyError
from .policy import MlpPolicy

INTERVENTION_NOISE_BOUND = 0.05


# ---------------------------------------------------------------------------
# Shield


class Shield:
    """Admissible action ids per state plus a correction rule.

    `admissible` is the membership test (Eq.-style post-shielding);
    `correction` is the subset corrections are drawn from: tied actions
    that also progress toward the decided region, so a corrected run
    cannot stall in a value-preserving cycle.
    """

    def __init__(self, admissible, correction, rule="random", seed=0,
                 result=None):
        if rule not in ("random", "lowest"):
            raise PolicyError(f"unknown correction rule {rule!r}")
        self.admissible = {int(s): tuple(ids)
                           for s, ids in admissible.items()}
        self.correction = {int(s): tuple(ids)
                           for s, ids in correction.items()}
        self.rule = rule
        self.seed = int(seed)
        self.result = result
        self._sets = {s: frozenset(ids)
                      for s, ids in self.admissible.items()}
        for s, ids in self.admissible.items():
            if not ids:
                raise CheckError(
                    f"empty admissible set at state {s} (checker bug)")
        for s, ids in self.correction.items():
            if not ids:
                raise CheckError(
                    f"empty correction set at state {s} (checker bug)")

    def admits(self, s, a):
        return a in self._sets[s]

    def correct(self, s, a, rng=None):
        """Executed action for proposal `a` in state `s`.

        Without an rng stream the random rule draws from a per-state
        generator derived from the shield seed, so repeated calls give a
        stable, induction-friendly choice.
        """
        if self.admits(s, a):
            return a
        opts = self.correction[s]
        if self.rule == "lowest" or len(opts) == 1:
            return opts[0]
        if rng is None:
            rng = np.random.default_rng([self.seed, s])
        return int(opts[rng.integers(0, len(opts))])

    def absorbing_mask(self):
        if self.result is None:
            raise CheckError("shield carries no check result")
        return self.result.yes_mask | self.result.no_mask


class ShieldedPolicy:
    """Deterministic composition of a base policy with a shield; random
    corrections resolve per state from the shield seed."""

    def __init__(self, base, shield):
        self.base = base
        self.shield = shield

    def choose(self, state_id, observation):
        a = self.base.choose(state_id, observation)
        return self.shield.correct(state_id, a)


def build_shield(m, f, epsilon=1e-6, rule="random", seed=0, result=None):
    """Shield for an optimality query: admissible sets at the caller's
    epsilon, corrections restricted to progress-safe tied actions."""
    if result is None:
        result = check_mdp(m, f)
    admissible = optimal_action_sets(m, result, epsilon)
    progress = progress_action_sets(m, result, min(epsilon, TIE_TOL))
    correction = {}
    for s, ids in progress.items():
        allowed = frozenset(admissible[s])
        kept = tuple(a for a in ids if a in allowed)
        correction[s] = kept if kept else admissible[s]
    return Shield(admissible, correction, rule=rule, seed=seed,
                  result=result)


def save_shield(shield, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "admissible_action_ids"])
        for s in sorted(shield.admissible):
            w.writerow([s, ";".join(str(a) for a in shield.admissible[s])])


# ---------------------------------------------------------------------------
# Training configuration


@dataclass
class TrainConfig:
    bc_epochs: int = 65
    learning_rate: float = 3e-4
    batch_size: int = 32
    seed: int = 0
    hidden: tuple = (64, 64)
    episodes: int = 2000
    step_cap: int = 500
    finetune_rounds: int = 4

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.bc_epochs < 1 or self.batch_size < 1 or self.episodes < 1:
            raise PolicyError("epochs, batch size, and episodes must be "
                              "positive")
        if self.learning_rate <= 0:
            raise PolicyError("learning rate must be positive")
        if self.step_cap < 1:
            raise PolicyError("step cap must be >= 1")
        if self.finetune_rounds < 1:
            raise PolicyError("fine-tune rounds must be >= 1")
        if any(h < 1 for h in self.hidden):
            raise PolicyError("hidden layer widths must be positive")


_CONFIG_INT_KEYS = ("bc_epochs", "batch_size", "seed", "episodes",
                    "step_cap", "finetune_rounds")


def parse_config(path):
    """TrainConfig from `key = value` lines; `#` comments.  `hidden` is a
    comma-separated width list (empty for a linear net)."""
    kwargs = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(
                    f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key in _CONFIG_INT_KEYS:
                kwargs[key] = int(value)
            elif key == "learning_rate":
                kwargs[key] = float(value)
            elif key == "hidden":
                kwargs[key] = tuple(int(v) for v in value.split(",")
                                    if v.strip())
            else:
                raise FormatError(f"{path}:{lineno}: unknown key {key!r}")
    return TrainConfig(**kwargs)


# ---------------------------------------------------------------------------
# Net training


def init_mlp(n_inputs, hidden, n_actions, rng):
    """Uniform init in +-sqrt(6/(fan_in+fan_out)), biases zero."""
    dims = [int(n_inputs)] + list(hidden) + [int(n_actions)]
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return MlpPolicy(weights, biases)


def _softmax_rows(z):
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grads(policy, X, y):
    """Mean softmax cross-entropy and its analytic parameter gradients."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    last = len(policy.weights) - 1
    h = X
    activations = [h]
    pre = []
    for i, (w, b) in enumerate(zip(policy.weights, policy.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
        activations.append(h)
    probs = _softmax_rows(activations[-1])
    picked = probs[np.arange(n), y]
    loss = float(np.mean(-np.log(np.maximum(picked, 1e-300))))
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads_w = [None] * len(policy.weights)
    grads_b = [None] * len(policy.weights)
    for i in range(last, -1, -1):
        grads_w[i] = delta.T @ activations[i]
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ policy.weights[i]) * (pre[i - 1] > 0.0)
    return loss, grads_w, grads_b


def _demo_arrays(demos):
    if isinstance(demos, tuple) and len(demos) == 2:
        X, y = demos
        return (np.asarray(X, dtype=np.float64),
                np.asarray(y, dtype=np.int64))
    if not demos:
        raise PolicyError("no demonstrations")
    dim = None
    xs, ys = [], []
    for o, a in demos:
        v = np.asarray(o, dtype=np.float64).ravel()
        if dim is None:
            dim = v.size
        elif v.size != dim:
            raise PolicyError(
                f"inconsistent observation dimensions: {v.size} vs {dim}")
        xs.append(v)
        ys.append(int(a))
    return np.asarray(xs), np.asarray(ys, dtype=np.int64)


def clone_behavior(demos, cfg, n_actions=None):
    """Supervised imitation of (observation, action) pairs.

    Mini-batch gradient descent on softmax cross-entropy; returns the
    trained policy and a per-epoch (loss, accuracy) log.
    """
    X, y = _demo_arrays(demos)
    if X.size == 0:
        raise PolicyError("no demonstrations")
    if n_actions is None:
        n_actions = int(y.max()) + 1
    if int(y.max()) >= n_actions:
        raise PolicyError(
            f"demo action {int(y.max())} out of range [0, {n_actions})")
    rng = np.random.default_rng([cfg.seed, 0])
    policy = init_mlp(X.shape[1], cfg.hidden, n_actions, rng)
    n = X.shape[0]
    log = []
    for epoch in range(1, cfg.bc_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, gw, gb = loss_and_grads(policy, X[idx], y[idx])
            for i in range(len(policy.weights)):
                policy.weights[i] -= cfg.learning_rate * gw[i]
                policy.biases[i] -= cfg.learning_rate * gb[i]
        loss, _, _ = loss_and_grads(policy, X, y)
        accuracy = float(np.mean(policy.actions_of_batch(X) == y))
        log.append({"epoch": epoch, "loss": loss, "accuracy": accuracy,
                    "intervention_rate": None})
    return policy, log


# ---------------------------------------------------------------------------
# Shielded fine-tuning


def _sample_successor(m, s, a, rng):
    dist = m.transitions[s][a]
    r = rng.random()
    acc = 0.0
    for t, p in dist:
        acc += p
        if r < acc:
            return t
    return dist[-1][0]


def _snapshot_pairs(policy, m, obs, shield):
    """One shield-compliant pair per state: keeps the retrained net
    defined (and admissible) on states the episodes may never visit."""
    pairs = []
    for s in range(m.n_states):
        o = obs.observe(s)
        a = shield.correct(s, policy.choose(s, o))
        pairs.append((o, a))
    return pairs


def _run_episodes(policy, m, obs, shield, rng, episodes, step_cap,
                  absorbing):
    """Simulate shielded episodes; returns (kept pairs, steps,
    interventions, censored episode count)."""
    kept = []
    steps = 0
    interventions = 0
    censored = 0
    for _ in range(episodes):
        s = m.initial_state
        trace = []
        ended = False
        for _ in range(step_cap):
            o = obs.observe(s)
            proposed = policy.choose(s, o)
            executed = shield.correct(s, proposed, rng)
            if not shield.admits(s, executed):
                raise InternalError(
                    f"shield executed inadmissible action {executed} at "
                    f"state {s}")
            if executed != proposed:
                interventions += 1
            steps += 1
            trace.append((o, executed))
            if absorbing[s]:
                ended = True
                break
            s = _sample_successor(m, s, executed, rng)
        if ended:
            kept.extend(trace)
        else:
            censored += 1
    return kept, steps, interventions, censored


def shielded_finetune(policy, m, obs, shield, cfg):
    """Iterated shield-corrected imitation.

    Runs seeded episodes under the post-shielded policy, aggregates the
    executed pairs (plus a one-pair-per-state compliant snapshot), and
    retrains after every round.  A final evaluation round measures the
    intervention rate of the returned policy; rates must not increase by
    more than the noise bound between rounds.
    """
    if not isinstance(policy, MlpPolicy):
        raise PolicyError("fine-tuning expects a net policy")
    absorbing = shield.absorbing_mask()
    n_actions = max(len(m.actions), policy.n_actions)
    per_round = max(1, cfg.episodes // cfg.finetune_rounds)
    aggregate = _snapshot_pairs(policy, m, obs, shield)
    log = []
    rates = []
    for rnd in range(1, cfg.finetune_rounds + 1):
        rng = np.random.default_rng([cfg.seed, rnd])
        pairs, steps, interventions, censored = _run_episodes(
            policy, m, obs, shield, rng, per_round, cfg.step_cap, absorbing)
        rate = interventions / steps if steps else 0.0
        rates.append(rate)
        aggregate.extend(pairs)
        round_cfg = TrainConfig(
            bc_epochs=cfg.bc_epochs, learning_rate=cfg.learning_rate,
            batch_size=cfg.batch_size, seed=cfg.seed + rnd,
            hidden=cfg.hidden, episodes=cfg.episodes,
            step_cap=cfg.step_cap, finetune_rounds=cfg.finetune_rounds)
        policy, train_log = clone_behavior(aggregate, round_cfg,
                                           n_actions=n_actions)
        log.append({"epoch": rnd, "loss": train_log[-1]["loss"],
                    "accuracy": train_log[-1]["accuracy"],
                    "intervention_rate": rate, "censored": censored})
    # Evaluation round: measure the final policy without retraining.
    rng = np.random.default_rng([cfg.seed, cfg.finetune_rounds + 1])
    _, steps, interventions, censored = _run_episodes(
        policy, m, obs, shield, rng, per_round, cfg.step_cap, absorbing)
    final_rate = interventions / steps if steps else 0.0
    rates.append(final_rate)
    log.append({"epoch": cfg.finetune_rounds + 1, "loss": None,
                "accuracy": None, "intervention_rate": final_rate,
                "censored": censored})
    for earlier, later in zip(rates, rates[1:]):
        if later > earlier + INTERVENTION_NOISE_BOUND:
            raise InternalError(
                f"intervention rate increased from {earlier:.4f} to "
                f"{later:.4f} across retraining rounds")
    return policy, log


# ---------------------------------------------------------------------------
# Dataset and log files


def save_demos(path, demos, feature_names=None):
    X, y = _demo_arrays(demos)
    d = X.shape[1]
    names = list(feature_names) if feature_names else \
        [f"f{i + 1}" for i in range(d)]
    if len(names) != d:
        raise FormatError(f"{len(names)} feature names for {d} features")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["action_id"])
        for row, a in zip(X, y):
            w.writerow([repr(float(v)) for v in row] + [int(a)])


def load_demos(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty demo file") from None
        if not header or header[-1].strip() != "action_id":
            raise FormatError(
                f"{path}: last column must be action_id, got {header!r}")
        d = len(header) - 1
        if d < 1:
            raise FormatError(f"{path}: no feature columns")
        xs, ys = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != d + 1:
                raise FormatError(
                    f"{path}:{lineno}: expected {d + 1} fields, "
                    f"got {len(row)}")
            try:
                xs.append([float(v) for v in row[:-1]])
                ys.append(int(row[-1]))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if not xs:
        raise FormatError(f"{path}: no demonstration rows")
    return (np.asarray(xs, dtype=np.float64),
            np.asarray(ys, dtype=np.int64))


def save_training_log(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss", "accuracy", "intervention_rate"])
        for row in rows:
            w.writerow([
                row.get("epoch", ""),
                "" if row.get("loss") is None else repr(float(row["loss"])),
                "" if row.get("accuracy") is None
                else repr(float(row["accuracy"])),
                "" if row.get("intervention_rate") is None
                else repr(float(row["intervention_rate"])),
            ])
