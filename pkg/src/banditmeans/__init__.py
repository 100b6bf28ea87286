"""Mean estimation for adaptively collected bandit data.

Simulates the full protocol (adaptive sampling, data-dependent
stopping, arm choice, optional rewinding to an earlier time) and checks
the resulting bias and risk against exactly computed closed-form
bounds.
"""

from ._version import __version__
from .arms import ArmSpec, arm_from_config
from .bounds import (
    BOUND_CATALOG,
    BoundReport,
    bound_bias_l1,
    bound_bregman_stopping,
    bound_finite_moment_nonadaptive,
    bound_fully_adaptive_bregman,
    bound_fully_adaptive_finite_moment,
    bound_fully_adaptive_l2,
    bound_minimax_nonadaptive,
    bound_r_quasinorm,
    bound_self_normalized,
    cb_constant,
    check,
    check_at_least,
    check_two_sided,
    quasinorm_order,
    risk_bound_constant,
)
from .cgf import (
    CgfFamily,
    LogPartition,
    bernoulli_cgf,
    bernstein,
    exp_family,
    family_from_config,
    sub_exponential,
    sub_gaussian,
)
from .errors import ConfigError, UndefinedStatError
from .estimators import (
    EffSampleSizes,
    EpisodeBatch,
    DependenceReport,
    MCEstimate,
    estimate_bias,
    estimate_bregman_risk,
    estimate_dependence,
    estimate_deviation_curve,
    estimate_eff_sizes,
    estimate_l1_risk,
    estimate_l2_risk,
    estimate_r_quasinorm,
)
from .engine import simulate
from .harness import (
    SCENARIO_NAMES,
    ExperimentConfig,
    RunReport,
    emit_plotdata,
    run,
    scenario,
    write_report,
)
from .protocol import DataView, EpisodeRecord, PolicyBundle, run_episode

__all__ = [
    "__version__",
    "ArmSpec",
    "arm_from_config",
    "BOUND_CATALOG",
    "BoundReport",
    "bound_bias_l1",
    "bound_bregman_stopping",
    "bound_finite_moment_nonadaptive",
    "bound_fully_adaptive_bregman",
    "bound_fully_adaptive_finite_moment",
    "bound_fully_adaptive_l2",
    "bound_minimax_nonadaptive",
    "bound_r_quasinorm",
    "bound_self_normalized",
    "cb_constant",
    "check",
    "check_at_least",
    "check_two_sided",
    "quasinorm_order",
    "risk_bound_constant",
    "CgfFamily",
    "LogPartition",
    "bernoulli_cgf",
    "bernstein",
    "exp_family",
    "family_from_config",
    "sub_exponential",
    "sub_gaussian",
    "ConfigError",
    "UndefinedStatError",
    "EffSampleSizes",
    "EpisodeBatch",
    "DependenceReport",
    "MCEstimate",
    "estimate_bias",
    "estimate_bregman_risk",
    "estimate_dependence",
    "estimate_deviation_curve",
    "estimate_eff_sizes",
    "estimate_l1_risk",
    "estimate_l2_risk",
    "estimate_r_quasinorm",
    "simulate",
    "SCENARIO_NAMES",
    "ExperimentConfig",
    "RunReport",
    "emit_plotdata",
    "run",
    "scenario",
    "write_report",
    "DataView",
    "EpisodeRecord",
    "PolicyBundle",
    "run_episode",
]
