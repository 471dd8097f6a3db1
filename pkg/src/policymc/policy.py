"""Policies over observations: feedforward nets with rectifier hidden
layers and identity output, tabular schedulers, feature pruning, and
permutation importance.

Action selection is always the argmax of the output scores with ties
broken by the lowest action id.
"""

import csv

import numpy as np

from .errors import FormatError, PolicyError


class MlpPolicy:
    """weights[l] has shape (d_l, d_{l-1}); activations are 'relu' for
    every hidden layer and 'identity' at the output."""

    def __init__(self, weights, biases):
        if len(weights) != len(biases) or not weights:
            raise PolicyError("need one bias vector per weight matrix")
        self.weights = []
        self.biases = []
        prev = None
        for layer, (w, b) in enumerate(zip(weights, biases), start=1):
            w = np.asarray(w, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise PolicyError(
                    f"layer {layer}: weight shape {w.shape} does not match "
                    f"bias shape {b.shape}")
            if prev is not None and w.shape[1] != prev:
                raise PolicyError(
                    f"layer {layer}: expects {w.shape[1]} inputs, previous "
                    f"layer produces {prev}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise PolicyError(f"layer {layer}: non-finite parameter")
            prev = w.shape[0]
            self.weights.append(w)
            self.biases.append(b)

    @property
    def n_inputs(self):
        return self.weights[0].shape[1]

    @property
    def n_actions(self):
        return self.weights[-1].shape[0]

    @property
    def dims(self):
        return (self.n_inputs,) + tuple(w.shape[0] for w in self.weights)

    def forward(self, o):
        """Score vector for one observation."""
        h = np.asarray(o, dtype=np.float64)
        if h.shape != (self.n_inputs,):
            raise PolicyError(
                f"observation has {h.size} features, policy expects "
                f"{self.n_inputs}")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = w @ h + b
            if i != last:
                h = np.maximum(h, 0.0)
        return h

    def forward_batch(self, obs_matrix):
        """Score matrix, one row per observation row."""
        h = np.asarray(obs_matrix, dtype=np.float64)
        if h.ndim != 2 or h.shape[1] != self.n_inputs:
            raise PolicyError(
                f"observation batch has shape {h.shape}, policy expects "
                f"(*, {self.n_inputs})")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if i != last:
                h = np.maximum(h, 0.0)
        return h

    def action_of(self, o):
        return int(np.argmax(self.forward(o)))

    def actions_of_batch(self, obs_matrix):
        return np.argmax(self.forward_batch(obs_matrix), axis=1)

    def prune_feature(self, i):
        """Copy with column i of the first weight matrix zeroed."""
        if not 0 <= i < self.n_inputs:
            raise PolicyError(
                f"feature index {i} out of range [0, {self.n_inputs})")
        weights = [w.copy() for w in self.weights]
        biases = [b.copy() for b in self.biases]
        weights[0][:, i] = 0.0
        return MlpPolicy(weights, biases)

    def copy(self):
        return MlpPolicy([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])

    def choose(self, state_id, observation):
        return self.action_of(observation)


class TabularPolicy:
    """state id -> action id, with an optional default for unmapped
    states."""

    def __init__(self, mapping, default=None):
        self.mapping = {int(s): int(a) for s, a in mapping.items()}
        self.default = None if default is None else int(default)

    def action_for(self, s):
        if s in self.mapping:
            return self.mapping[s]
        if self.default is not None:
            return self.default
        raise PolicyError(f"policy undefined at state {s} and no default "
                          f"action is set")

    def choose(self, state_id, observation):
        return self.action_for(state_id)


# ---------------------------------------------------------------------------
# Permutation importance


class ImportanceReport:
    """Per state: importance score per feature (argmax-change fraction)
    and the top-ranked feature; globally: per feature, the fraction of
    states where it ranks first.  Rank ties break to the lowest index."""

    def __init__(self, feature_names, state_ids, scores):
        self.feature_names = tuple(feature_names)
        self.state_ids = tuple(int(s) for s in state_ids)
        self.scores = np.asarray(scores, dtype=np.float64)
        if self.scores.shape != (len(self.state_ids),
                                 len(self.feature_names)):
            raise PolicyError("importance score matrix shape mismatch")
        self.top_index = (np.argmax(self.scores, axis=1)
                          if self.state_ids else np.zeros(0, dtype=np.int64))

    def top_feature(self, s):
        i = self.state_ids.index(s)
        return self.feature_names[self.top_index[i]]

    def covers(self, s):
        return s in self.state_ids

    def rank1_fractions(self):
        n = len(self.state_ids)
        out = []
        for j, name in enumerate(self.feature_names):
            hits = int(np.sum(self.top_index == j))
            out.append((name, hits / n if n else 0.0))
        return out

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["state", "top_feature"] + list(self.feature_names))
            for i, s in enumerate(self.state_ids):
                row = [s, self.feature_names[self.top_index[i]]]
                row += [repr(float(v)) for v in self.scores[i]]
                w.writerow(row)

    def save_summary_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["feature", "fraction_rank1"])
            for name, frac in self.rank1_fractions():
                w.writerow([name, repr(float(frac))])


def permutation_importance(policy, obs, k=64, seed=0):
    """Argmax-change fraction per (state, feature) under k seeded draws
    from the feature's empirical marginal.

    The draw stream for each (state, feature) pair is derived from the
    master seed and the pair, so evaluation order cannot change results.
    """
    if k < 1:
        raise PolicyError(f"sample count must be >= 1, got {k}")
    state_ids = sorted(obs.rows)
    if not state_ids:
        raise PolicyError("empty observation table")
    d = obs.d
    marginals = [obs.feature_values(i) for i in range(d)]
    scores = np.zeros((len(state_ids), d), dtype=np.float64)
    for row, s in enumerate(state_ids):
        base_obs = obs.rows[s]
        base_action = policy.action_of(base_obs)
        for i in range(d):
            rng = np.random.default_rng([seed, s, i])
            draws = marginals[i][rng.integers(0, marginals[i].size, size=k)]
            changed = 0
            perturbed = base_obs.copy()
            for v in draws:
                perturbed[i] = v
                if policy.action_of(perturbed) != base_action:
                    changed += 1
            scores[row, i] = changed / k
    return ImportanceReport(obs.feature_names, state_ids, scores)


# ---------------------------------------------------------------------------
# Serialization


def save_policy(policy, path):
    if isinstance(policy, MlpPolicy):
        lines = ["MLPNET 1", f"layers {len(policy.weights)}",
                 f"input {policy.n_inputs}"]
        for i, w in enumerate(policy.weights):
            kind = "identity" if i == len(policy.weights) - 1 else "relu"
            lines.append(f"layer {w.shape[0]} {kind}")
        for w, b in zip(policy.weights, policy.biases):
            for row in w:
                lines.append(" ".join(repr(float(v)) for v in row))
            lines.append(" ".join(repr(float(v)) for v in b))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    elif isinstance(policy, TabularPolicy):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["state", "action_id"])
            for s in sorted(policy.mapping):
                w.writerow([s, policy.mapping[s]])
    else:
        raise PolicyError(f"cannot save policy of type {type(policy)!r}")


def _load_mlp(lines, path):
    def take(idx, what):
        if idx >= len(lines):
            raise FormatError(f"{path}: unexpected end of file, "
                              f"expected {what}")
        return lines[idx]

    header = take(1, "layer count")
    if not header.startswith("layers "):
        raise FormatError(f"{path}: expected 'layers <k>', got {header!r}")
    try:
        k = int(header.split()[1])
    except (IndexError, ValueError):
        raise FormatError(f"{path}: bad layer count {header!r}") from None
    if k < 1:
        raise FormatError(f"{path}: need at least one layer")
    header = take(2, "input width")
    if not header.startswith("input "):
        raise FormatError(f"{path}: expected 'input <d>', got {header!r}")
    d0 = int(header.split()[1])
    dims = [d0]
    kinds = []
    for layer in range(k):
        parts = take(3 + layer, f"layer {layer + 1} header").split()
        if (len(parts) != 3 or parts[0] != "layer"
                or not parts[1].isdigit() or int(parts[1]) < 1
                or parts[2] not in ("relu", "identity")):
            raise FormatError(
                f"{path}: layer {layer + 1}: expected 'layer <dim> "
                f"<relu|identity>'")
        dims.append(int(parts[1]))
        kinds.append(parts[2])
    if kinds != ["relu"] * (k - 1) + ["identity"]:
        raise FormatError(
            f"{path}: activations must be relu on hidden layers and "
            f"identity at the output, got {kinds}")

    pos = 3 + k
    weights = []
    biases = []
    for layer in range(k):
        rows = []
        for r in range(dims[layer + 1]):
            text = take(pos, f"layer {layer + 1} weight row {r + 1}")
            values = text.split()
            if len(values) != dims[layer]:
                raise FormatError(
                    f"{path}: layer {layer + 1}: weight row {r + 1} has "
                    f"{len(values)} values, expected {dims[layer]}")
            try:
                rows.append([float(v) for v in values])
            except ValueError as exc:
                raise FormatError(
                    f"{path}: layer {layer + 1}: {exc}") from None
            pos += 1
        text = take(pos, f"layer {layer + 1} bias")
        values = text.split()
        if len(values) != dims[layer + 1]:
            raise FormatError(
                f"{path}: layer {layer + 1}: bias has {len(values)} values, "
                f"expected {dims[layer + 1]}")
        biases.append([float(v) for v in values])
        weights.append(rows)
        pos += 1
    if pos != len(lines):
        raise FormatError(f"{path}: {len(lines) - pos} trailing lines")
    try:
        return MlpPolicy(weights, biases)
    except PolicyError as exc:
        raise FormatError(f"{path}: {exc}") from None


def load_policy(path):
    """Load either format: MLPNET 1 text or a scheduler-table CSV.

    Tables carry the header state,action_id, optionally followed by
    ,action_name as the synthesize export writes; names are ignored.
    """
    with open(path) as fh:
        text = fh.read()
    lines = [line.rstrip("\n") for line in text.splitlines()]
    lines = [line for line in lines if line.strip()]
    if not lines:
        raise FormatError(f"{path}: empty policy file")
    if lines[0].strip() == "MLPNET 1":
        return _load_mlp([line.strip() for line in lines], path)
    header = lines[0].strip().replace(" ", "")
    if header in ("state,action_id", "state,action_id,action_name"):
        n_cols = header.count(",") + 1
        mapping = {}
        for lineno, line in enumerate(lines[1:], start=2):
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != n_cols:
                raise FormatError(
                    f"{path}:{lineno}: expected {n_cols} fields")
            try:
                mapping[int(parts[0])] = int(parts[1])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
        return TabularPolicy(mapping)
    raise FormatError(
        f"{path}: unrecognized policy header {lines[0]!r} (expected "
        f"'MLPNET 1' or 'state,action_id')")
