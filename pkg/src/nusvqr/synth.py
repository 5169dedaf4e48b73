"""Artificial datasets AD1 (Gaussian noise) and AD2 (uniform noise).

Both use ``x ~ U(-4, 4)`` and ``y = (1 - x + 2x^2) exp(-x^2/2) + noise``, so
the conditional tau-quantile is the base curve shifted by the noise quantile.

Random numbers come from NumPy's PCG64 bit generator seeded through
``SeedSequence([seed, stream])``; stream 0 is the training sample and other
streams are independent draws (test sets). Gaussian noise is produced by the
Box-Muller transform on that uniform stream, so a dataset is a pure function
of ``(spec, stream)`` on every platform NumPy supports.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .loss import check_tau


class SynthKind(str, enum.Enum):
    AD1 = "AD1"
    AD2 = "AD2"


@dataclass(frozen=True)
class SynthSpec:
    dataset: SynthKind = SynthKind.AD1
    l: int = 200
    sigma: float = 0.2
    a: float = -0.1
    b: float = 0.1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dataset", SynthKind(self.dataset))
        if self.l < 1:
            raise ValueError("l must be at least 1")
        if self.dataset is SynthKind.AD1 and not self.sigma > 0:
            raise ValueError("sigma must be positive for AD1")
        if self.dataset is SynthKind.AD2 and not self.a < self.b:
            raise ValueError("AD2 needs a < b")

    def to_dict(self) -> dict:
        d = {"dataset": self.dataset.value, "l": self.l, "seed": self.seed}
        if self.dataset is SynthKind.AD1:
            d["sigma"] = self.sigma
        else:
            d["a"], d["b"] = self.a, self.b
        return d


def base_function(x):
    x = np.asarray(x, dtype=float)
    out = (1.0 - x + 2.0 * x * x) * np.exp(-0.5 * x * x)
    return float(out) if out.ndim == 0 else out


def make_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)])))


def box_muller(rng: np.random.Generator, n: int) -> np.ndarray:
    m = (n + 1) // 2
    u1 = 1.0 - rng.random(m)  # (0, 1]
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    return np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]


def noise(spec: SynthSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    if spec.dataset is SynthKind.AD1:
        return spec.sigma * box_muller(rng, n)
    return spec.a + (spec.b - spec.a) * rng.random(n)


def generate(spec: SynthSpec, stream: int = 0) -> Dataset:
    rng = make_rng(spec.seed, stream)
    x = -4.0 + 8.0 * rng.random(spec.l)
    y = base_function(x) + noise(spec, rng, spec.l)
    return Dataset(x[:, None], y)


# Acklam's rational approximation to the standard normal quantile.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    return ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
            / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def norm_ppf(p: float) -> float:
    """Standard normal quantile: Acklam's approximation plus one Newton step on erfc."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p!r}")
    x = _acklam(p)
    pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return x - (norm_cdf(x) - p) / pdf


def noise_quantile(spec: SynthSpec, tau: float) -> float:
    tau = check_tau(tau)
    if spec.dataset is SynthKind.AD1:
        return spec.sigma * norm_ppf(tau)
    return spec.a + tau * (spec.b - spec.a)


def true_quantile(spec: SynthSpec, tau: float, x):
    return base_function(x) + noise_quantile(spec, tau)
