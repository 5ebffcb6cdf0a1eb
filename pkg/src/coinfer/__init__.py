"""Planning and trace-replay simulation for device-edge collaborative DNN inference.

The pipeline: profile layers and fit per-kind latency regressions, search
(exit point, partition point) pairs for a latency deadline, precompute a
bandwidth-state map for fluctuating links, and replay bandwidth traces
against the resulting planners.
"""

from .errors import (
    CoinferError,
    MissingModelError,
    ParseError,
    ValidationError,
)
from .model_graph import BranchyModel, ExitBranch, LayerKind, LayerSpec, load_model
from .latency_model import LatencyPredictor, ProfileRecord, Side, fit, predict
from .static_planner import CoInferencePlan, estimate_latency, plan_static
from .config_map import ConfigurationMap, MapEntry, Strategy, build_map, compute_reward
from .changepoint import ChangepointDetector, DetectorConfig
from .dynamic_planner import OnlineOptimizer, init_optimizer

__version__ = "0.1.0"

__all__ = [
    "BranchyModel",
    "ChangepointDetector",
    "CoInferencePlan",
    "CoinferError",
    "ConfigurationMap",
    "DetectorConfig",
    "ExitBranch",
    "LatencyPredictor",
    "LayerKind",
    "LayerSpec",
    "MapEntry",
    "MissingModelError",
    "OnlineOptimizer",
    "ParseError",
    "ProfileRecord",
    "Side",
    "Strategy",
    "ValidationError",
    "build_map",
    "compute_reward",
    "estimate_latency",
    "fit",
    "init_optimizer",
    "load_model",
    "plan_static",
    "predict",
]
