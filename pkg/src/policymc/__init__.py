"""policymc: explicit-state probabilistic model checking and policy
analysis for small MDPs.

Parse guarded-command models or tabular benchmark dumps, verify
reachability and until properties, synthesize optimal schedulers, build
the chains neural or tabular policies induce, and train/explain those
policies with a model-checking shield in the loop.
"""

__version__ = "0.1.0"

from .analysis import (pruning_sweep, run_property_battery,
                       save_battery_csv, save_ranking_csv)
from .checking import (CheckResult, CompiledMdp, check_dtmc, check_mdp,
                       extract_scheduler, optimal_action_sets,
                       prob01_sets, progress_action_sets,
                       save_scheduler_csv, save_values_csv)
from .errors import (CheckError, FormatError, InternalError, ModelError,
                     ParseError, PolicyError, PolicymcError)
from .induction import (InducedDtmc, induce, label_actions,
                        label_top_feature, save_lab, save_stats, save_tra)
from .kernels import BACKEND as KERNEL_BACKEND
from .learning import (Shield, ShieldedPolicy, TrainConfig, build_shield,
                       clone_behavior, init_mlp, load_demos,
                       loss_and_grads, parse_config, save_demos,
                       save_shield, save_training_log, shielded_finetune)
from .model import (ExplicitDtmc, ExplicitMdp, LabelRule, LabelRuleSet,
                    ObservationTable, apply_label_rules, load_label_rules,
                    load_observation_table, validate_mdp)
from .pctl import (PctlFormula, format_property, parse_property,
                   parse_property_file)
from .policy import (ImportanceReport, MlpPolicy, TabularPolicy,
                     load_policy, permutation_importance, save_policy)
from .prism import (build_explicit, load_prism, parse_prism, pretty_print,
                    to_dtmc)
from .tabular import TabularMdpInput, convert_tabular, load_tabular

__all__ = [
    "__version__", "KERNEL_BACKEND",
    "PolicymcError", "ParseError", "FormatError", "ModelError",
    "CheckError", "PolicyError", "InternalError",
    "ExplicitMdp", "ExplicitDtmc", "ObservationTable", "LabelRule",
    "LabelRuleSet", "validate_mdp", "apply_label_rules",
    "load_observation_table", "load_label_rules",
    "parse_prism", "load_prism", "build_explicit", "pretty_print",
    "to_dtmc",
    "TabularMdpInput", "load_tabular", "convert_tabular",
    "PctlFormula", "parse_property", "parse_property_file",
    "format_property",
    "CompiledMdp", "CheckResult", "check_mdp", "check_dtmc",
    "prob01_sets", "extract_scheduler", "optimal_action_sets",
    "progress_action_sets", "save_scheduler_csv", "save_values_csv",
    "MlpPolicy", "TabularPolicy", "ImportanceReport",
    "permutation_importance", "save_policy", "load_policy",
    "InducedDtmc", "induce", "label_actions", "label_top_feature",
    "save_tra", "save_lab", "save_stats",
    "Shield", "ShieldedPolicy", "TrainConfig", "build_shield",
    "clone_behavior", "shielded_finetune", "init_mlp", "loss_and_grads",
    "parse_config", "save_demos", "load_demos", "save_shield",
    "save_training_log",
    "pruning_sweep", "run_property_battery", "save_ranking_csv",
    "save_battery_csv",
]
