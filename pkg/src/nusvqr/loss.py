"""Pinball losses.

The residual convention throughout is ``u = y - f(x)``. The asymmetric
eps-insensitive loss is flat on the closed band ``[-tau*eps, (1-tau)*eps]``,
whose total width is ``eps``.
"""

from __future__ import annotations

import numpy as np


def check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau!r}")
    return tau


def pinball_loss(tau: float, u):
    tau = check_tau(tau)
    u = np.asarray(u, dtype=float)
    out = np.where(u >= 0, tau * u, (tau - 1.0) * u)
    return float(out) if out.ndim == 0 else out


def asym_eps_pinball_loss(tau: float, eps: float, u):
    tau = check_tau(tau)
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps!r}")
    u = np.asarray(u, dtype=float)
    below = -(1.0 - tau) * (u + tau * eps)
    above = tau * (u - (1.0 - tau) * eps)
    out = np.maximum(np.maximum(below, 0.0), above)
    return float(out) if out.ndim == 0 else out


def empirical_risk(tau: float, eps: float, residuals) -> float:
    residuals = np.asarray(residuals, dtype=float).ravel()
    return float(np.sum(asym_eps_pinball_loss(tau, eps, residuals)))
