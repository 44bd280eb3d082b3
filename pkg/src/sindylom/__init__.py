"""Sparse identification of discrete-time dynamics with an optimized RBF library."""

__version__ = "0.1.0"

from .dataset import TimeSeriesDataset, load_csv, save_csv, shifted  # noqa: E402
from .library import append_rbfs, polynomial_library  # noqa: E402
from .liboptim import GaConfig, LomConfig, Strategy, optimize, run_strategy_comparison  # noqa: E402
from .loss import LossWeights, j_ms, j_os  # noqa: E402
from .model_io import load_model, save_model  # noqa: E402
from .rollout import SindyModel, predict_one_step, predict_rlt  # noqa: E402
from .stlsq import StlsqConfig, fit  # noqa: E402

__all__ = [
    "TimeSeriesDataset", "load_csv", "save_csv", "shifted",
    "polynomial_library", "append_rbfs",
    "StlsqConfig", "fit",
    "SindyModel", "predict_one_step", "predict_rlt",
    "LossWeights", "j_ms", "j_os",
    "GaConfig", "LomConfig", "Strategy", "optimize", "run_strategy_comparison",
    "load_model", "save_model",
]
