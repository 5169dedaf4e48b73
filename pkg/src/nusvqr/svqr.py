"""Support vector quantile regression: standard, eps-insensitive and nu variants.

All three are trained through their Wolfe duals over ``z = (alpha; beta)``
with ``Q = [[K, -K], [-K, K]]`` and predict with
``f(x) = sum_i (alpha_i - beta_i) K(x, x_i) + b``.

* standard: the eps model with ``eps = 0``.
* eps:  boxes ``[0, C*tau]`` and ``[0, C*(1-tau)]``, linear term
  ``(-y + (1-tau)*eps; y + tau*eps)``, equality ``sum(alpha) = sum(beta)``.
* nu:   boxes ``[0, C*tau/l]`` and ``[0, C*(1-tau)/l]``, linear term ``(-y; y)``,
  the same equality and ``(1-tau)*sum(alpha) + tau*sum(beta) <= C*nu*tau*(1-tau)``.

For the nu model the tube width ``eps`` and the bias are read off the points
whose multipliers lie strictly inside their box, which sit exactly on the
upper and lower tube edges.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .datasets import Dataset
from .kernel import KernelSpec, cross_kernel, gram_matrix
from .loss import check_tau
from .qp import QpProblem, SignedGram, solve_qp
from .qp import DEFAULT_MAX_ITER, DEFAULT_TOL

INTERIOR_MARGIN = 1e-7
SV_RELTOL = 1e-8
BOUNDARY_RELTOL = 1e-6
MODEL_FORMAT = "nusvqr-model"
MODEL_FORMAT_VERSION = 1


class ModelKind(str, enum.Enum):
    STANDARD = "standard"
    EPS = "eps"
    NU = "nu"


class DegenerateRecovery(ArithmeticError):
    """No multiplier lies strictly inside its box on a side that the recovery needs."""


@dataclass(frozen=True)
class FitConfig:
    model: ModelKind = ModelKind.NU
    tau: float = 0.5
    C: float = 1.0
    nu: float = 0.5
    eps: float = 0.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        object.__setattr__(self, "model", ModelKind(self.model))
        check_tau(self.tau)
        if not (np.isfinite(self.C) and self.C > 0):
            raise ValueError(f"C must be positive, got {self.C!r}")
        if self.model is ModelKind.NU and not 0.0 < self.nu <= 1.0:
            raise ValueError(f"nu must lie in (0, 1], got {self.nu!r}")
        if self.model is ModelKind.EPS and not self.eps >= 0:
            raise ValueError(f"eps must be non-negative, got {self.eps!r}")
        if self.model is ModelKind.STANDARD:
            object.__setattr__(self, "eps", 0.0)
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter at least 1")

    def box_bounds(self, l: int) -> tuple[float, float]:
        """Upper bounds of ``alpha_i`` and ``beta_i``."""
        scale = self.C / l if self.model is ModelKind.NU else self.C
        return scale * self.tau, scale * (1.0 - self.tau)

    def to_dict(self) -> dict:
        return {"model": self.model.value, "tau": self.tau, "C": self.C, "nu": self.nu,
                "eps": self.eps, "kernel": self.kernel.to_dict(), "tol": self.tol,
                "max_iter": self.max_iter}

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        d = dict(d)
        d["kernel"] = KernelSpec.from_dict(d["kernel"])
        return cls(**d)


@dataclass(frozen=True)
class TrainedModel:
    coeffs: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    bias: float
    eps_width: float
    sv_indices: np.ndarray
    boundary_upper: np.ndarray
    boundary_lower: np.ndarray
    X_train: np.ndarray
    config: FitConfig
    diagnostics: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("coeffs", "alpha", "beta", "sv_indices", "boundary_upper",
                     "boundary_lower", "X_train"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_train(self) -> int:
        return self.X_train.shape[0]

    def predict(self, X) -> np.ndarray:
        return predict(self, X)


def _stacked(first, second):
    return np.concatenate([np.asarray(first, dtype=float), np.asarray(second, dtype=float)])


def build_nu_dual(data: Dataset, config: FitConfig, gram: np.ndarray,
                  nu: Optional[float] = None) -> QpProblem:
    """Dual of the nu model. ``nu`` overrides ``config.nu`` (used for the nu=0 limit)."""
    l = len(data)
    tau, C = config.tau, config.C
    nu = config.nu if nu is None else float(nu)
    ua, ub = C * tau / l, C * (1.0 - tau) / l
    return QpProblem(
        Q=SignedGram.stacked(gram),
        c=_stacked(-data.y, data.y),
        lower=np.zeros(2 * l),
        upper=_stacked(np.full(l, ua), np.full(l, ub)),
        eq_coeffs=_stacked(np.ones(l), -np.ones(l)),
        eq_rhs=0.0,
        ineq_coeffs=_stacked(np.full(l, 1.0 - tau), np.full(l, tau)),
        ineq_rhs=C * nu * tau * (1.0 - tau),
    )


def build_eps_dual(data: Dataset, config: FitConfig, gram: np.ndarray) -> QpProblem:
    l = len(data)
    tau, C, eps = config.tau, config.C, config.eps
    return QpProblem(
        Q=SignedGram.stacked(gram),
        c=_stacked(-data.y + (1.0 - tau) * eps, data.y + tau * eps),
        lower=np.zeros(2 * l),
        upper=_stacked(np.full(l, C * tau), np.full(l, C * (1.0 - tau))),
        eq_coeffs=_stacked(np.ones(l), -np.ones(l)),
        eq_rhs=0.0,
    )


def _interior(v, ub):
    margin = INTERIOR_MARGIN * ub
    return (v > margin) & (v < ub - margin)


def _at_upper(v, ub):
    return v >= ub - INTERIOR_MARGIN * ub


def _at_zero(v, ub):
    return v <= INTERIOR_MARGIN * ub


def recover_epsilon(alpha, beta, y, ftilde, ua: float, ub: float) -> float:
    """Tube width from one point on each tube edge; no bias is needed.

    ``ftilde`` is the kernel expansion without bias at the training points.
    With several candidates on an edge the pairwise widths are averaged,
    which equals the difference of the mean edge residuals.
    """
    r = np.asarray(y, dtype=float) - np.asarray(ftilde, dtype=float)
    upper = _interior(np.asarray(alpha), ua)
    lower = _interior(np.asarray(beta), ub)
    if not upper.any() or not lower.any():
        raise DegenerateRecovery("need a multiplier strictly inside its box on both edges")
    return max(float(np.mean(r[upper]) - np.mean(r[lower])), 0.0)


def recover_bias(alpha, beta, y, ftilde, eps: float, tau: float, ua: float, ub: float) -> float:
    """Pooled average of the bias implied by every point on either tube edge."""
    r = np.asarray(y, dtype=float) - np.asarray(ftilde, dtype=float)
    upper = _interior(np.asarray(alpha), ua)
    lower = _interior(np.asarray(beta), ub)
    if not upper.any() and not lower.any():
        raise DegenerateRecovery("no multiplier lies strictly inside its box")
    votes = np.concatenate([r[upper] - (1.0 - tau) * eps, r[lower] + tau * eps])
    return float(np.mean(votes))


def bias_interval(alpha, beta, r, eps: float, tau: float, ua: float, ub: float):
    """Interval of biases consistent with the KKT conditions for fixed multipliers and eps."""
    up = (1.0 - tau) * eps
    dn = tau * eps
    lo_parts = [r[_at_zero(alpha, ua)] - up, r[_at_upper(beta, ub)] + dn]
    hi_parts = [r[_at_upper(alpha, ua)] - up, r[_at_zero(beta, ub)] + dn]
    lo = max((float(p.max()) for p in lo_parts if p.size), default=-np.inf)
    hi = min((float(p.min()) for p in hi_parts if p.size), default=np.inf)
    return lo, hi


def _midpoint(lo, hi):
    if np.isfinite(lo) and np.isfinite(hi):
        return 0.5 * (lo + hi)
    if np.isfinite(lo):
        return lo
    if np.isfinite(hi):
        return hi
    return 0.0


def _nu_fallback(alpha, beta, r, tau, ua, ub, solver_eps):
    upper = _interior(alpha, ua)
    lower = _interior(beta, ub)
    top = None
    if upper.any():
        top = float(np.mean(r[upper]))
    elif _at_upper(alpha, ua).any():
        top = float(np.min(r[_at_upper(alpha, ua)]))
    bottom = None
    if lower.any():
        bottom = float(np.mean(r[lower]))
    elif _at_upper(beta, ub).any():
        bottom = float(np.max(r[_at_upper(beta, ub)]))
    if top is not None and bottom is not None:
        eps = max(top - bottom, 0.0)
        b = 0.5 * ((top - (1.0 - tau) * eps) + (bottom + tau * eps))
        return eps, b
    eps = max(solver_eps, 0.0)
    return eps, _midpoint(*bias_interval(alpha, beta, r, eps, tau, ua, ub))


def sv_tolerance(config: FitConfig, l: int) -> float:
    """Coefficients at or below this magnitude count as zero (not support vectors)."""
    ua, ub = config.box_bounds(l)
    return SV_RELTOL * (ua + ub)


def _index_sets(alpha, beta, ua, ub):
    coeffs = alpha - beta
    sv = np.flatnonzero(np.abs(coeffs) > SV_RELTOL * (ua + ub))
    return sv, np.flatnonzero(_interior(alpha, ua)), np.flatnonzero(_interior(beta, ub))


def fit(data: Dataset, config: FitConfig, gram: Optional[np.ndarray] = None) -> TrainedModel:
    l = len(data)
    if l < 2:
        raise ValueError(f"need at least 2 training points, got {l}")
    K = gram_matrix(config.kernel, data.X) if gram is None else gram
    if config.model is ModelKind.NU:
        problem = build_nu_dual(data, config, K)
    else:
        problem = build_eps_dual(data, config, K)
    sol = solve_qp(problem, tol=config.tol, max_iter=config.max_iter)

    alpha = sol.z[:l].copy()
    beta = sol.z[l:].copy()
    # alpha_i and beta_i can only overlap at optima with eps = 0; removing the
    # overlap leaves alpha - beta, both constraints and the objective unchanged.
    overlap = np.minimum(alpha, beta)
    alpha -= overlap
    beta -= overlap

    tau = config.tau
    ua, ub = config.box_bounds(l)
    coeffs = alpha - beta
    ftilde = K @ coeffs
    r = data.y - ftilde
    degenerate = False
    if config.model is ModelKind.NU:
        try:
            eps = recover_epsilon(alpha, beta, data.y, ftilde, ua, ub)
            bias = recover_bias(alpha, beta, data.y, ftilde, eps, tau, ua, ub)
        except DegenerateRecovery:
            degenerate = True
            eps, bias = _nu_fallback(alpha, beta, r, tau, ua, ub, sol.ineq_multiplier)
    else:
        eps = config.eps
        try:
            bias = recover_bias(alpha, beta, data.y, ftilde, eps, tau, ua, ub)
        except DegenerateRecovery:
            degenerate = True
            bias = _midpoint(*bias_interval(alpha, beta, r, eps, tau, ua, ub))

    sv, bu, bl = _index_sets(alpha, beta, ua, ub)
    diagnostics = {
        "recovery_degenerate": degenerate,
        "dual_objective": sol.objective,
        "kkt_residual": sol.kkt_residual,
        "iterations": sol.iterations,
        "solver_bias": -sol.eq_multiplier,
        "solver_eps": sol.ineq_multiplier,
        "solver_phase": sol.diagnostics.get("phase"),
        "max_overlap_removed": float(np.max(overlap, initial=0.0)),
    }
    return TrainedModel(coeffs=coeffs, alpha=alpha, beta=beta, bias=float(bias),
                        eps_width=float(eps), sv_indices=sv, boundary_upper=bu,
                        boundary_lower=bl, X_train=data.X.copy(), config=config,
                        diagnostics=diagnostics)


def decision_without_bias(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != model.X_train.shape[1]:
        raise ValueError(
            f"expected {model.X_train.shape[1]} features, got {X.shape[1]}")
    active = np.flatnonzero(model.coeffs)
    if active.size == 0:
        return np.zeros(X.shape[0])
    return cross_kernel(model.config.kernel, X, model.X_train[active]) @ model.coeffs[active]


def predict(model: TrainedModel, X) -> np.ndarray:
    return decision_without_bias(model, X) + model.bias


def residuals(model: TrainedModel, data: Dataset) -> np.ndarray:
    return data.y - predict(model, data.X)


def slacks(model: TrainedModel, data: Dataset):
    """Primal slacks ``(xi, xi_star)`` reconstructed from the fitted tube."""
    tau, eps = model.config.tau, model.eps_width
    r = residuals(model, data)
    return np.maximum(r - (1.0 - tau) * eps, 0.0), np.maximum(-r - tau * eps, 0.0)


def primal_objective(model: TrainedModel, data: Dataset, gram: Optional[np.ndarray] = None) -> float:
    """Primal objective at the reconstructed ``(w, b, eps, xi, xi*)``."""
    cfg = model.config
    K = gram_matrix(cfg.kernel, data.X) if gram is None else gram
    delta = np.asarray(model.coeffs)
    reg = 0.5 * float(delta @ K @ delta)
    xi, xis = slacks(model, data)
    tau = cfg.tau
    risk = float(np.sum(tau * xi + (1.0 - tau) * xis))
    if cfg.model is ModelKind.NU:
        return reg + cfg.C * (cfg.nu * tau * (1.0 - tau) * model.eps_width + risk / len(data))
    return reg + cfg.C * risk


def dual_objective(model: TrainedModel, data: Dataset, gram: Optional[np.ndarray] = None) -> float:
    """Objective of the (minimisation form of the) dual at ``(alpha, beta)``."""
    cfg = model.config
    K = gram_matrix(cfg.kernel, data.X) if gram is None else gram
    if cfg.model is ModelKind.NU:
        problem = build_nu_dual(data, cfg, K)
    else:
        problem = build_eps_dual(data, cfg, K)
    return problem.objective(np.concatenate([model.alpha, model.beta]))


# serialisation ---------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def model_to_dict(model: TrainedModel) -> dict:
    # Python's float repr is the shortest string that round-trips exactly.
    return _jsonable({
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "config": model.config.to_dict(),
        "bias": model.bias,
        "eps_width": model.eps_width,
        "coeffs": model.coeffs,
        "alpha": model.alpha,
        "beta": model.beta,
        "X_train": model.X_train,
        "sv_indices": model.sv_indices,
        "boundary_upper": model.boundary_upper,
        "boundary_lower": model.boundary_lower,
        "diagnostics": model.diagnostics,
        "metadata": model.metadata,
    })


def model_from_dict(d: dict) -> TrainedModel:
    if d.get("format") != MODEL_FORMAT:
        raise ValueError("not a serialized nusvqr model")
    if d.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('version')!r}")
    X = np.array(d["X_train"], dtype=float).reshape(len(d["coeffs"]), -1)
    return TrainedModel(
        coeffs=np.array(d["coeffs"], dtype=float),
        alpha=np.array(d["alpha"], dtype=float),
        beta=np.array(d["beta"], dtype=float),
        bias=float(d["bias"]),
        eps_width=float(d["eps_width"]),
        sv_indices=np.array(d["sv_indices"], dtype=np.intp),
        boundary_upper=np.array(d["boundary_upper"], dtype=np.intp),
        boundary_lower=np.array(d["boundary_lower"], dtype=np.intp),
        X_train=X,
        config=FitConfig.from_dict(d["config"]),
        diagnostics=d.get("diagnostics", {}),
        metadata=d.get("metadata", {}),
    )


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> TrainedModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def with_metadata(model: TrainedModel, **meta) -> TrainedModel:
    return replace(model, metadata={**model.metadata, **meta})
