"""Kernel functions and Gram matrices.

Only the RBF kernel ``exp(-||x - y||^2 / q)`` and the plain dot product are
supported. Note that ``q`` divides the squared distance directly; there is no
factor of two as in the ``gamma``/``sigma`` parametrisations used elsewhere.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class KernelFamily(str, enum.Enum):
    RBF = "rbf"
    LINEAR = "linear"


@dataclass(frozen=True)
class KernelSpec:
    family: KernelFamily = KernelFamily.RBF
    q: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if self.family is KernelFamily.RBF and not (np.isfinite(self.q) and self.q > 0):
            raise ValueError(f"RBF width q must be positive, got {self.q!r}")

    def to_dict(self) -> dict:
        return {"family": self.family.value, "q": float(self.q)}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(KernelFamily(d["family"]), float(d["q"]))


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d feature matrix, got shape {X.shape}")
    return X


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if spec.family is KernelFamily.LINEAR:
        return float(np.dot(x, y))
    d = x - y
    return float(np.exp(-np.dot(d, d) / spec.q))


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # Difference-based, not the ||a||^2 + ||b||^2 - 2ab expansion: keeps
    # K(x, x) == 1 exactly and avoids negative round-off.
    if A.shape[1] == 1:
        return (A[:, 0][:, None] - B[:, 0][None, :]) ** 2
    out = np.empty((A.shape[0], B.shape[0]))
    for k in range(A.shape[0]):
        d = B - A[k]
        out[k] = np.einsum("ij,ij->i", d, d)
    return out


def cross_kernel(spec: KernelSpec, A, B) -> np.ndarray:
    """Kernel matrix between the rows of ``A`` (m x n) and ``B`` (p x n)."""
    A = _as_matrix(A)
    B = _as_matrix(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]} features")
    if spec.family is KernelFamily.LINEAR:
        return A @ B.T
    return np.exp(-_sq_dists(A, B) / spec.q)


def gram_matrix(spec: KernelSpec, X) -> np.ndarray:
    """Symmetric l x l Gram matrix of the rows of ``X``."""
    X = _as_matrix(X)
    if X.shape[0] == 0:
        raise ValueError("empty feature matrix")
    G = cross_kernel(spec, X, X)
    # Force exact symmetry regardless of BLAS summation order.
    iu = np.triu_indices(G.shape[0], 1)
    G[(iu[1], iu[0])] = G[iu]
    return G
