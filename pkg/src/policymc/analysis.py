"""Policy explanation: feature-pruning sweeps and property batteries."""

import csv

from .checking import CompiledMdp, check_dtmc, check_mdp
from .errors import CheckError, PolicyError
from .induction import induce
from .model import ExplicitDtmc, ExplicitMdp
from .pctl import format_property, parse_property_file
from .policy import MlpPolicy


def pruning_sweep(policy, m, obs, labeler, f):
    """Effect of silencing each input feature on an induced-chain
    probability.

    Feature i is silenced by zeroing its first-layer weights; the pruned
    policy re-induces a chain and `f` (an undirected value query) is
    checked on it.  delta = base - pruned; rows come back sorted by
    |delta| descending, ties by feature index.
    """
    if not isinstance(policy, MlpPolicy):
        raise PolicyError("pruning needs a net policy")
    if f.direction is not None or f.bound is not None:
        raise CheckError(
            f"pruning sweep needs a plain value query: {format_property(f)}")
    if policy.n_inputs != len(obs.feature_names):
        raise PolicyError(
            f"policy reads {policy.n_inputs} features, table has "
            f"{len(obs.feature_names)}")
    base_chain = induce(m, policy, obs=obs, rules=labeler).chain
    base_prob = check_dtmc(base_chain, f).initial_value
    rows = []
    for i, name in enumerate(obs.feature_names):
        pruned = policy.prune_feature(i)
        chain = induce(m, pruned, obs=obs, rules=labeler).chain
        pruned_prob = check_dtmc(chain, f).initial_value
        rows.append({
            "feature": name,
            "base_prob": base_prob,
            "pruned_prob": pruned_prob,
            "delta": base_prob - pruned_prob,
        })
    order = sorted(range(len(rows)),
                   key=lambda i: (-abs(rows[i]["delta"]), i))
    return [rows[i] for i in order]


def save_ranking_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["feature", "base_prob", "pruned_prob", "delta"])
        for row in rows:
            w.writerow([row["feature"], repr(float(row["base_prob"])),
                        repr(float(row["pruned_prob"])),
                        repr(float(row["delta"]))])


def run_property_battery(model, props):
    """Check a property list against one model.

    `props` is a property-file path, a list of formulas, or a list of
    (text, formula) pairs.  MDP queries must carry a direction, chain
    queries must not; each row reports the initial-state probability
    and, for threshold queries, a sat/unsat verdict.  Row order follows
    the property order.
    """
    if isinstance(props, str):
        props = parse_property_file(props)
    pairs = []
    for item in props:
        if isinstance(item, tuple):
            pairs.append(item)
        else:
            pairs.append((format_property(item), item))
    if isinstance(model, ExplicitMdp):
        checker = check_mdp
        compiled = CompiledMdp(model)
    elif isinstance(model, ExplicitDtmc):
        checker = check_dtmc
        compiled = CompiledMdp(model.as_mdp())
    else:
        raise CheckError(f"cannot check a {type(model).__name__}")
    rows = []
    for i, (text, f) in enumerate(pairs, start=1):
        result = checker(model, f, compiled=compiled)
        verdict = ""
        if result.verdict is not None:
            verdict = "sat" if result.verdict else "unsat"
        rows.append({
            "id": i,
            "property": text,
            "probability": result.initial_value,
            "verdict": verdict,
        })
    return rows


def save_battery_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "property", "probability", "verdict"])
        for row in rows:
            w.writerow([row["id"], row["property"],
                        repr(float(row["probability"])), row["verdict"]])
