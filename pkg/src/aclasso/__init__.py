"""Adaptive cluster Lasso: screening, correlation clustering and group-wise selection."""

from .clustering import VariableClusterer, cluster_columns, cut, hier_cluster, representatives
from .core import DesignMatrix, ResponseVector, Scaling, gram, norms, predict, standardize, support
from .diagnostics import beta_min_check, gir_check, group_beta_min_check, ir_theta_bound, ir_theta_exact
from .group_lasso import GroupLasso, GroupPartition, fit_group_lasso, orthonormalize_groups
from .lasso import Lasso, fit_adaptive_lasso, fit_lasso, lambda_path, lasso_path, threshold_fit
from .pipeline import (
    ACLConfig,
    AdaptiveClusterLasso,
    FitResult,
    fit_acgl,
    fit_acrl,
    fit_cglcor,
    fit_crlcor,
    fit_lasso_cv,
    fit_method,
)
from .bench import mse, run_benchmark, tpr, tpr_curve
from .screening import correlation_screen, stage1
from .simulation import ScenarioConfig, generate, pseudo_real

__version__ = "0.1.0"

__all__ = [
    "ACLConfig",
    "AdaptiveClusterLasso",
    "DesignMatrix",
    "FitResult",
    "GroupLasso",
    "GroupPartition",
    "Lasso",
    "ResponseVector",
    "Scaling",
    "ScenarioConfig",
    "VariableClusterer",
    "beta_min_check",
    "cluster_columns",
    "correlation_screen",
    "cut",
    "fit_acgl",
    "fit_acrl",
    "fit_adaptive_lasso",
    "fit_cglcor",
    "fit_crlcor",
    "fit_group_lasso",
    "fit_lasso",
    "fit_lasso_cv",
    "fit_method",
    "generate",
    "gir_check",
    "gram",
    "group_beta_min_check",
    "hier_cluster",
    "ir_theta_bound",
    "ir_theta_exact",
    "lambda_path",
    "lasso_path",
    "mse",
    "norms",
    "orthonormalize_groups",
    "predict",
    "pseudo_real",
    "representatives",
    "run_benchmark",
    "stage1",
    "standardize",
    "support",
    "threshold_fit",
    "tpr",
    "tpr_curve",
]
