"""Kernel quantile regression with nu-, eps- and standard support vector models."""

from .datasets import Dataset, DataFormatError, load_servo, read_csv, write_csv
from .kernel import KernelFamily, KernelSpec, cross_kernel, gram_matrix, kernel_eval
from .loss import asym_eps_pinball_loss, empirical_risk, pinball_loss
from .metrics import (TubeStats, coverage_error, mae_vs_truth, rmse_vs_truth, sparsity,
                      tube_stats)
from .qp import QpNonConvergenceError, QpProblem, QpSolution, solve_qp
from .svqr import (DegenerateRecovery, FitConfig, ModelKind, TrainedModel, build_eps_dual,
                   build_nu_dual, fit, load_model, predict, save_model)
from .synth import SynthKind, SynthSpec, generate, true_quantile

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DataFormatError", "load_servo", "read_csv", "write_csv",
    "KernelFamily", "KernelSpec", "cross_kernel", "gram_matrix", "kernel_eval",
    "asym_eps_pinball_loss", "empirical_risk", "pinball_loss",
    "TubeStats", "coverage_error", "mae_vs_truth", "rmse_vs_truth", "sparsity", "tube_stats",
    "QpNonConvergenceError", "QpProblem", "QpSolution", "solve_qp",
    "DegenerateRecovery", "FitConfig", "ModelKind", "TrainedModel", "build_eps_dual",
    "build_nu_dual", "fit", "load_model", "predict", "save_model",
    "SynthKind", "SynthSpec", "generate", "true_quantile",
]
