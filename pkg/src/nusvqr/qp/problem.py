"""Problem/solution containers and the KKT certificate for the dual QPs.

The problems have the form::

    minimize    0.5 z'Qz + c'z
    subject to  lower <= z <= upper
                eq_coeffs'z  = eq_rhs
                ineq_coeffs'z <= ineq_rhs          (optional)

and a point is certified through the stationarity condition::

    Qz + c - mu_eq * eq_coeffs + mu_ineq * ineq_coeffs - (bound multipliers) = 0

with ``mu_ineq >= 0`` and the bound multipliers signed according to which
face of the box each coordinate sits on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np


class QpError(RuntimeError):
    pass


class QpInfeasibleError(QpError):
    pass


class QpNonConvergenceError(QpError):
    """Raised when the iteration budget runs out before the KKT tolerance is met.

    The best iterate and its certificate residual are attached so callers can
    decide whether the point is still usable.
    """

    def __init__(self, message, z=None, residual=np.inf, iterations=0):
        super().__init__(message)
        self.z = z
        self.residual = residual
        self.iterations = iterations


class SignedGram:
    """Quadratic term ``Q[i, j] = s_i * s_j * K[idx_i, idx_j]`` without materialising it.

    The SVQR duals use ``Q = [[K, -K], [-K, K]]``, i.e. ``idx = (0..l-1, 0..l-1)``
    and ``s = (+1, ..., -1, ...)``. Storing only ``K`` halves memory four-fold.
    """

    def __init__(self, K: np.ndarray, index: np.ndarray, signs: np.ndarray):
        self.K = np.ascontiguousarray(K, dtype=float)
        self.index = np.asarray(index, dtype=np.intp)
        self.signs = np.asarray(signs, dtype=float)
        if self.index.shape != self.signs.shape:
            raise ValueError("index and signs must have the same length")

    @classmethod
    def stacked(cls, K: np.ndarray) -> "SignedGram":
        l = K.shape[0]
        idx = np.concatenate([np.arange(l), np.arange(l)])
        s = np.concatenate([np.ones(l), -np.ones(l)])
        return cls(K, idx, s)

    @property
    def shape(self):
        n = self.index.shape[0]
        return (n, n)

    def column(self, i: int) -> np.ndarray:
        return (self.signs[i] * self.signs) * self.K[self.index[i]][self.index]

    def diagonal(self) -> np.ndarray:
        return np.diagonal(self.K)[self.index].copy()

    def matvec(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        w = np.zeros(self.K.shape[0])
        np.add.at(w, self.index, self.signs * z)
        return self.signs * (self.K @ w)[self.index]

    def submatrix(self, idx) -> np.ndarray:
        s = self.signs[idx]
        k = self.index[idx]
        return np.outer(s, s) * self.K[np.ix_(k, k)]

    def permuted(self, perm) -> "SignedGram":
        return SignedGram(self.K, self.index[perm], self.signs[perm])

    def toarray(self) -> np.ndarray:
        return np.outer(self.signs, self.signs) * self.K[np.ix_(self.index, self.index)]


class DenseQ:
    """Adapter giving a dense symmetric matrix the same interface as :class:`SignedGram`."""

    def __init__(self, Q):
        self.Q = np.ascontiguousarray(Q, dtype=float)

    @property
    def shape(self):
        return self.Q.shape

    def column(self, i: int) -> np.ndarray:
        return self.Q[i]

    def diagonal(self) -> np.ndarray:
        return np.diagonal(self.Q).copy()

    def matvec(self, z) -> np.ndarray:
        return self.Q @ np.asarray(z, dtype=float)

    def submatrix(self, idx) -> np.ndarray:
        return self.Q[np.ix_(idx, idx)]

    def permuted(self, perm) -> "DenseQ":
        return DenseQ(self.Q[np.ix_(perm, perm)])

    def toarray(self) -> np.ndarray:
        return self.Q.copy()


QuadraticTerm = Union[np.ndarray, SignedGram, DenseQ]


def as_operator(Q: QuadraticTerm):
    if isinstance(Q, (SignedGram, DenseQ)):
        return Q
    return DenseQ(Q)


@dataclass
class QpProblem:
    Q: QuadraticTerm
    c: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    eq_coeffs: np.ndarray
    eq_rhs: float = 0.0
    ineq_coeffs: Optional[np.ndarray] = None
    ineq_rhs: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        m = self.c.shape[0]
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.eq_coeffs = np.asarray(self.eq_coeffs, dtype=float)
        self.eq_rhs = float(self.eq_rhs)
        if self.ineq_coeffs is not None:
            self.ineq_coeffs = np.asarray(self.ineq_coeffs, dtype=float)
            if self.ineq_coeffs.shape != (m,):
                raise ValueError("ineq_coeffs has the wrong length")
        self.ineq_rhs = float(self.ineq_rhs)
        if not isinstance(self.Q, (SignedGram, DenseQ)):
            self.Q = np.asarray(self.Q, dtype=float)
        if self.operator.shape != (m, m):
            raise ValueError(f"Q has shape {self.operator.shape}, expected {(m, m)}")
        for name in ("lower", "upper", "eq_coeffs"):
            if getattr(self, name).shape != (m,):
                raise ValueError(f"{name} has the wrong length")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if isinstance(self.Q, np.ndarray):
            scale = max(1.0, float(np.max(np.abs(self.Q))) if m else 1.0)
            if np.max(np.abs(self.Q - self.Q.T), initial=0.0) > 1e-12 * scale:
                raise ValueError("Q is not symmetric")

    @property
    def size(self) -> int:
        return self.c.shape[0]

    @property
    def operator(self):
        return as_operator(self.Q)

    @property
    def has_ineq(self) -> bool:
        return self.ineq_coeffs is not None

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ self.operator.matvec(z) + self.c @ z)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.operator.toarray())[0])

    def check_psd(self, tol: float = 1e-8) -> None:
        lam = self.min_eigenvalue()
        if lam < -tol:
            raise ValueError(f"Q is not positive semidefinite (min eigenvalue {lam:.3e})")


@dataclass
class QpSolution:
    z: np.ndarray
    eq_multiplier: float
    ineq_multiplier: float
    objective: float
    kkt_residual: float
    iterations: int
    diagnostics: dict = field(default_factory=dict)


def kkt_residual(problem: QpProblem, z, mu_eq: float, mu_ineq: float = 0.0,
                 bound_tol: float = 1e-10) -> float:
    """Largest violation of the KKT system at ``(z, mu_eq, mu_ineq)``.

    Covers stationarity (with bound multipliers reconstructed from the sign of
    the reduced gradient), primal feasibility, dual sign of ``mu_ineq`` and
    complementary slackness of the inequality. Computed from scratch with a
    fresh ``Qz`` so it is independent of any solver bookkeeping.
    """
    z = np.asarray(z, dtype=float)
    r = problem.operator.matvec(z) + problem.c - mu_eq * problem.eq_coeffs
    if problem.has_ineq:
        r = r + mu_ineq * problem.ineq_coeffs
    lo, hi = problem.lower, problem.upper
    span = np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
    at_lo = z <= lo + bound_tol * span
    at_hi = z >= hi - bound_tol * span
    # at the lower face r >= 0 is allowed, at the upper face r <= 0
    stat = np.abs(r)
    stat = np.where(at_lo & ~at_hi, np.maximum(-r, 0.0), stat)
    stat = np.where(at_hi & ~at_lo, np.maximum(r, 0.0), stat)
    stat = np.where(at_lo & at_hi, 0.0, stat)
    parts = [float(np.max(stat, initial=0.0))]
    parts.append(float(np.max(np.maximum(lo - z, 0.0), initial=0.0)))
    parts.append(float(np.max(np.maximum(z - hi, 0.0), initial=0.0)))
    parts.append(abs(float(problem.eq_coeffs @ z) - problem.eq_rhs))
    if problem.has_ineq:
        slack = problem.ineq_rhs - float(problem.ineq_coeffs @ z)
        parts.append(max(-slack, 0.0))
        parts.append(max(-mu_ineq, 0.0))
        parts.append(abs(mu_ineq * slack))
    return max(parts)
