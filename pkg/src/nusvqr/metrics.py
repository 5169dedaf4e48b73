"""Evaluation criteria and tube statistics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .datasets import Dataset
from .loss import check_tau


def _pair(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty input")
    return a, b


def rmse_vs_truth(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return math.sqrt(float(np.mean((p - t) ** 2)))


def mae_vs_truth(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean(np.abs(p - t)))


def coverage(pred, y) -> float:
    """Empirical coverage ``p_tau``: fraction of responses at or below the estimate."""
    p, yy = _pair(pred, y)
    return float(np.count_nonzero(yy <= p)) / yy.size


def coverage_error(pred, y, tau: float) -> float:
    tau = check_tau(tau)
    return abs(coverage(pred, y) - tau)


def sparsity(coeffs, zero_tol: float) -> float:
    c = np.asarray(coeffs, dtype=float).ravel()
    if c.size == 0:
        raise ValueError("empty coefficient vector")
    return float(np.count_nonzero(np.abs(c) <= zero_tol)) / c.size


def boundary_tol(y) -> float:
    return 1e-6 * (1.0 + float(np.max(np.abs(y), initial=0.0)))


@dataclass(frozen=True)
class TubeStats:
    n_above: int
    n_below: int
    n_on_boundary: int
    n_sv: int
    frac_errors: float
    frac_sv: float
    ratio_above_below: float
    eps_width: float

    def to_dict(self) -> dict:
        return asdict(self)


def classify(residuals, tau: float, eps: float, tol: float) -> np.ndarray:
    """Per-point position relative to the tube: +1 above, -1 below, 0 inside or on an edge."""
    r = np.asarray(residuals, dtype=float)
    out = np.zeros(r.shape, dtype=int)
    out[r > (1.0 - tau) * eps + tol] = 1
    out[r < -tau * eps - tol] = -1
    return out


def tube_stats(model, data: Dataset) -> TubeStats:
    from .svqr import residuals

    tau, eps = model.config.tau, model.eps_width
    r = residuals(model, data)
    tol = boundary_tol(data.y)
    side = classify(r, tau, eps, tol)
    on_edge = ((np.abs(r - (1.0 - tau) * eps) <= tol) | (np.abs(r + tau * eps) <= tol))
    m1 = int(np.count_nonzero(side == 1))
    m2 = int(np.count_nonzero(side == -1))
    l = len(data)
    n_sv = int(len(model.sv_indices))
    return TubeStats(
        n_above=m1,
        n_below=m2,
        n_on_boundary=int(np.count_nonzero(on_edge & (side == 0))),
        n_sv=n_sv,
        frac_errors=(m1 + m2) / l,
        frac_sv=n_sv / l,
        ratio_above_below=(m1 / m2) if m2 else math.inf,
        eps_width=float(eps),
    )
