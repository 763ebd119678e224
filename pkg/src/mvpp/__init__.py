"""Multi-view predictive partitioning with two-block PLS."""

__version__ = "0.1.0"

from .errors import (
    DegenerateClusterError,
    DegenerateLeverageError,
    InvalidInputError,
    MvppError,
    ParseError,
    UnsupportedConfigurationError,
)
from .influence import InfluenceSet, predictive_influence, rank_by_influence, rank_by_residual
from .linalg_core import Policy, standardize, truncated_svd
from .model_selection import SelectionCurve, select_k, select_r
from .mvpp import MvppConfig, MvppState, run
from .press import PressReport, closed_form_press, fixed_weights_loo_press, press_for
from .simgen import (
    ScenarioConfig,
    generate_influence_dataset,
    generate_line_plane,
    generate_scenario_a,
    generate_scenario_b,
)
from .tbpls import DataPair, TbplsModel, fit, loo_prediction_error, predict

__all__ = [
    "DataPair",
    "DegenerateClusterError",
    "DegenerateLeverageError",
    "InfluenceSet",
    "InvalidInputError",
    "MvppConfig",
    "MvppError",
    "MvppState",
    "ParseError",
    "Policy",
    "PressReport",
    "ScenarioConfig",
    "SelectionCurve",
    "TbplsModel",
    "UnsupportedConfigurationError",
    "closed_form_press",
    "fit",
    "fixed_weights_loo_press",
    "generate_influence_dataset",
    "generate_line_plane",
    "generate_scenario_a",
    "generate_scenario_b",
    "loo_prediction_error",
    "predict",
    "predictive_influence",
    "press_for",
    "rank_by_influence",
    "rank_by_residual",
    "run",
    "select_k",
    "select_r",
    "standardize",
    "truncated_svd",
]
