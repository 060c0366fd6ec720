"""Multiple locally linear kernel machine: Python bindings."""

from ._mllkm import (
    LinearModel,
    Model,
    TrainResult,
    dual_objective,
    gen_piecewise,
    kernel_eval,
    load_libsvm,
    log_gamma_grid,
    sdca,
    train,
    train_linear,
)

__all__ = [
    "LinearModel",
    "Model",
    "TrainResult",
    "dual_objective",
    "gen_piecewise",
    "kernel_eval",
    "load_libsvm",
    "log_gamma_grid",
    "sdca",
    "train",
    "train_linear",
]
