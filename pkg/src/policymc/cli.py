"""Command-line front end.

Exit codes: 0 success, 1 a threshold property was violated, 2 bad input
(parse, format, model, or policy errors), 3 internal invariant failure.
"""

import argparse
import os
import sys
import traceback

from . import __version__
from .analysis import (pruning_sweep, run_property_battery,
                       save_battery_csv, save_ranking_csv)
from .checking import (check_mdp, extract_scheduler, save_scheduler_csv,
                       save_values_csv)
from .errors import (CheckError, FormatError, InternalError, ModelError,
                     ParseError, PolicyError)
from .induction import induce, save_lab, save_stats, save_tra
from .learning import (TrainConfig, build_shield, clone_behavior,
                       load_demos, parse_config, save_shield,
                       save_training_log, shielded_finetune)
from .model import (ExplicitMdp, apply_label_rules, load_label_rules,
                    load_observation_table)
from .pctl import parse_property, parse_property_file
from .policy import (MlpPolicy, load_policy, permutation_importance,
                     save_policy)
from .prism import build_explicit, load_prism, pretty_print, to_dtmc
from .tabular import convert_tabular, load_tabular

_INPUT_ERRORS = (ParseError, FormatError, ModelError, PolicyError,
                 CheckError, FileNotFoundError, IsADirectoryError,
                 PermissionError)


def _sidecar(path, suffix):
    base, _ = os.path.splitext(path)
    return base + suffix


def _load_props(spec_text):
    """Property list from a file path or inline text."""
    if os.path.exists(spec_text):
        return [f for _, f in parse_property_file(spec_text)]
    return [parse_property(spec_text)]


def _single_prop(spec_text):
    props = _load_props(spec_text)
    if len(props) != 1:
        raise CheckError(
            f"expected exactly one property, got {len(props)}")
    return props[0]


def _load_model(args):
    """Model file -> ExplicitMdp or ExplicitDtmc, with optional rule
    labels applied from an observation table."""
    ast = load_prism(args.model)
    m = build_explicit(ast)
    obs_path = getattr(args, "obs", None)
    rules_path = getattr(args, "labels", None)
    if rules_path:
        if not obs_path:
            raise FormatError("--labels needs --obs")
        obs = load_observation_table(obs_path, n_states=m.n_states)
        rules = load_label_rules(rules_path)
        m = m.with_labels(apply_label_rules(m, obs, rules))
    if ast.kind == "dtmc":
        return to_dtmc(m)
    return m


def _require_mdp(model):
    if not isinstance(model, ExplicitMdp):
        raise ModelError("this command needs an mdp model")
    return model


def _load_obs(args, m=None):
    n = m.n_states if m is not None else None
    return load_observation_table(args.obs, n_states=n)


def _train_config(args):
    cfg = parse_config(args.config) if args.config else TrainConfig()
    overrides = {}
    for key in ("bc_epochs", "learning_rate", "batch_size", "seed",
                "episodes", "step_cap", "finetune_rounds"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "hidden", None) is not None:
        overrides["hidden"] = tuple(
            int(v) for v in args.hidden.split(",") if v.strip())
    if overrides:
        cfg = TrainConfig(**{**cfg.__dict__, **overrides})
    return cfg


# ---------------------------------------------------------------------------
# Subcommands


def cmd_check(args):
    model = _load_model(args)
    if os.path.exists(args.prop):
        props = args.prop
    else:
        props = [parse_property(args.prop)]
    rows = run_property_battery(model, props)
    for row in rows:
        print(f"{row['probability']:.6f}")
    if args.out:
        save_battery_csv(args.out, rows)
    if any(row["verdict"] == "unsat" for row in rows):
        return 1
    return 0


def cmd_synthesize(args):
    m = _require_mdp(_load_model(args))
    f = _single_prop(args.prop)
    result = check_mdp(m, f)
    scheduler = extract_scheduler(m, result)
    save_scheduler_csv(args.out, m, scheduler)
    if args.values:
        save_values_csv(args.values, result.values)
    print(f"{result.initial_value:.6f}")
    return 1 if result.verdict is False else 0


def cmd_convert(args):
    inp = load_tabular(args.transitions, args.initial, args.meta)
    ast, _ = convert_tabular(inp)
    with open(args.out, "w") as fh:
        fh.write(pretty_print(ast))
    return 0


def cmd_induce(args):
    m = _require_mdp(_load_model_plain(args))
    policy = load_policy(args.policy)
    obs = _load_obs(args, m) if args.obs else None
    rules = load_label_rules(args.labels) if args.labels else None
    ind = induce(m, policy, obs=obs, rules=rules)
    save_tra(ind, args.out)
    save_lab(ind, _sidecar(args.out, ".lab"))
    save_stats(ind, _sidecar(args.out, ".stats"),
               extra={"threads": args.threads})
    return 0


def _load_model_plain(args):
    """Model without rule labels: induce/prune apply rules themselves."""
    ast = load_prism(args.model)
    m = build_explicit(ast)
    if ast.kind == "dtmc":
        return to_dtmc(m)
    return m


def cmd_prune_sweep(args):
    m = _require_mdp(_load_model_plain(args))
    policy = load_policy(args.policy)
    if not isinstance(policy, MlpPolicy):
        raise PolicyError(f"{args.policy}: pruning needs a net policy")
    obs = _load_obs(args, m)
    rules = load_label_rules(args.labels) if args.labels else None
    f = _single_prop(args.prop)
    rows = pruning_sweep(policy, m, obs, rules, f)
    save_ranking_csv(args.out, rows)
    if rows:
        print(f"{rows[0]['base_prob']:.6f}")
    return 0


def cmd_permute(args):
    policy = load_policy(args.policy)
    obs = load_observation_table(args.obs)
    report = permutation_importance(policy, obs, k=args.k, seed=args.seed)
    report.save_csv(args.out)
    report.save_summary_csv(_sidecar(args.out, "_summary.csv"))
    return 0


def cmd_train_bc(args):
    cfg = _train_config(args)
    X, y = load_demos(args.demos)
    policy, log = clone_behavior((X, y), cfg, n_actions=args.n_actions)
    save_policy(policy, args.out)
    save_training_log(_sidecar(args.out, "_log.csv"), log)
    print(f"{log[-1]['accuracy']:.6f}")
    return 0


def cmd_train_shielded(args):
    m = _require_mdp(_load_model(args))
    f = _single_prop(args.prop)
    policy_in = load_policy(args.policy_in)
    if not isinstance(policy_in, MlpPolicy):
        raise PolicyError(f"{args.policy_in}: fine-tuning needs a net "
                          f"policy")
    obs = _load_obs(args, m)
    cfg = _train_config(args)
    shield = build_shield(m, f, epsilon=args.epsilon, rule=args.rule,
                          seed=cfg.seed)
    policy, log = shielded_finetune(policy_in, m, obs, shield, cfg)
    save_policy(policy, args.out)
    save_training_log(_sidecar(args.out, "_log.csv"), log)
    if args.shield_out:
        save_shield(shield, args.shield_out)
    print(f"{log[-1]['intervention_rate']:.6f}")
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_common(sp):
    sp.add_argument("--threads", type=int, default=1,
                    help="worker count recorded in stats outputs")


def _add_train_overrides(sp):
    sp.add_argument("--config", help="key = value training config file")
    sp.add_argument("--bc-epochs", dest="bc_epochs", type=int)
    sp.add_argument("--learning-rate", dest="learning_rate", type=float)
    sp.add_argument("--batch-size", dest="batch_size", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--hidden", help="comma-separated layer widths")
    sp.add_argument("--episodes", type=int)
    sp.add_argument("--step-cap", dest="step_cap", type=int)
    sp.add_argument("--finetune-rounds", dest="finetune_rounds", type=int)


def build_parser():
    p = argparse.ArgumentParser(
        prog="policymc",
        description="Probabilistic model checking and policy analysis.")
    p.add_argument("--version", action="version",
                   version=f"policymc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("check", help="check properties against a model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--prop", required=True,
                    help="property file or inline property text")
    sp.add_argument("--obs", help="observation table for rule labels")
    sp.add_argument("--labels", help="label rule file (needs --obs)")
    sp.add_argument("--out", help="battery report CSV")
    _add_common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("synthesize",
                        help="extract an optimal scheduler")
    sp.add_argument("--model", required=True)
    sp.add_argument("--prop", required=True)
    sp.add_argument("--out", required=True, help="scheduler CSV")
    sp.add_argument("--values", help="per-state value CSV")
    _add_common(sp)
    sp.set_defaults(func=cmd_synthesize)

    sp = sub.add_parser("convert",
                        help="tabular CSV triple to a model file")
    sp.add_argument("--transitions", required=True)
    sp.add_argument("--initial", required=True)
    sp.add_argument("--meta", required=True)
    sp.add_argument("--out", required=True)
    _add_common(sp)
    sp.set_defaults(func=cmd_convert)

    sp = sub.add_parser("induce",
                        help="build the chain a policy induces")
    sp.add_argument("--model", required=True)
    sp.add_argument("--policy", required=True)
    sp.add_argument("--obs")
    sp.add_argument("--labels")
    sp.add_argument("--out", required=True,
                    help=".tra path; .lab/.stats written alongside")
    _add_common(sp)
    sp.set_defaults(func=cmd_induce)

    sp = sub.add_parser("prune-sweep",
                        help="rank features by pruning effect")
    sp.add_argument("--model", required=True)
    sp.add_argument("--policy", required=True)
    sp.add_argument("--obs", required=True)
    sp.add_argument("--labels")
    sp.add_argument("--prop", required=True)
    sp.add_argument("--out", required=True)
    _add_common(sp)
    sp.set_defaults(func=cmd_prune_sweep)

    sp = sub.add_parser("permute",
                        help="permutation importance of a policy")
    sp.add_argument("--policy", required=True)
    sp.add_argument("--obs", required=True)
    sp.add_argument("--k", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    _add_common(sp)
    sp.set_defaults(func=cmd_permute)

    sp = sub.add_parser("train-bc",
                        help="behavioral cloning from demonstrations")
    sp.add_argument("--demos", required=True)
    sp.add_argument("--n-actions", dest="n_actions", type=int)
    sp.add_argument("--out", required=True)
    _add_train_overrides(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_train_bc)

    sp = sub.add_parser("train-shielded",
                        help="shield-guarded fine-tuning")
    sp.add_argument("--model", required=True)
    sp.add_argument("--prop", required=True)
    sp.add_argument("--policy-in", dest="policy_in", required=True)
    sp.add_argument("--obs", required=True)
    sp.add_argument("--labels")
    sp.add_argument("--epsilon", type=float, default=1e-6)
    sp.add_argument("--rule", choices=("random", "lowest"),
                    default="random")
    sp.add_argument("--shield-out", dest="shield_out")
    sp.add_argument("--out", required=True)
    _add_train_overrides(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_train_shielded)

    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
