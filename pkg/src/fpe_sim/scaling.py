"""Scale transformation x -> eps^a x, t -> eps^b t and the similarity variable.

Under that transformation a Fokker-Planck equation keeps its form when the
drift and diffusion coefficients rescale with exponents d = a - b and
e = 2a - b.  Normalisation of W then fixes its exponent to c = -a, and every
similarity solution has the shape

    W(x, t)   = t**(-alpha) * y(z),       z = x / t**alpha,  alpha = a / b
    D1(x, t)  = t**(alpha - 1)   * rho1(z)
    D2(x, t)  = t**(2*alpha - 1) * rho2(z)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import DomainError, SingularityError

__all__ = [
    "UNBOUNDED",
    "Unbounded",
    "ScalingIndices",
    "SimilarityProblem",
    "check_scaling_consistency",
    "similarity_variable",
    "density_from_profile",
    "coefficients_at",
    "INDEX_TOL",
]

INDEX_TOL = 1e-12


class Unbounded:
    """Marker for an infinite end of the similarity domain."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNBOUNDED"

    def __str__(self) -> str:
        return "unbounded"

    def __reduce__(self):
        return (Unbounded, ())


UNBOUNDED = Unbounded()

Bound = Union[float, Unbounded]


@dataclass(frozen=True)
class ScalingIndices:
    """Exponents of x, t, W, D1 and D2 under the scale transformation."""

    a: float
    b: float
    c: float
    d: float
    e: float

    def __post_init__(self):
        if self.a == 0 or self.b == 0:
            raise DomainError("scaling indices need a != 0 and b != 0")

    @property
    def alpha(self) -> float:
        return self.a / self.b

    def consistent(self, tol: float = INDEX_TOL) -> bool:
        return abs(self.b - (self.a - self.d)) <= tol and abs(self.b - (2 * self.a - self.e)) <= tol

    def normalizable(self, tol: float = INDEX_TOL) -> bool:
        return abs(self.c + self.a) <= tol

    @classmethod
    def from_alpha(cls, alpha: float, b: float = 1.0) -> "ScalingIndices":
        """Consistent, normalisable indices with a / b = alpha."""
        a = alpha * b
        return cls(a=a, b=b, c=-a, d=a - b, e=2 * a - b)


def check_scaling_consistency(idx: ScalingIndices) -> bool:
    return idx.consistent()


def _fd_first(fn, z):
    h = np.maximum(1e-6, 1e-6 * np.abs(z))
    return (fn(z + h) - fn(z - h)) / (2 * h)


def _fd_second(fn, z):
    # 100x the first-difference step: at 1e-6 roundoff alone is ~1e-4 relative
    h = np.maximum(1e-4, 1e-4 * np.abs(z))
    return (fn(z + h) - 2 * fn(z) + fn(z - h)) / (h * h)


@dataclass(frozen=True)
class SimilarityProblem:
    """Scale-invariant drift/diffusion profiles on a similarity domain.

    ``rho1`` and ``rho2`` must accept numpy arrays.  Missing derivative
    evaluators fall back to central differences with step
    ``max(1e-6, 1e-6 |z|)`` (100 times larger for the second derivative).
    """

    rho1: Callable
    rho2: Callable
    alpha: float
    z_lo: Bound = UNBOUNDED
    z_hi: Bound = UNBOUNDED
    rho2_prime: Optional[Callable] = None
    rho2_second: Optional[Callable] = None
    rho1_prime: Optional[Callable] = None

    def __post_init__(self):
        if self.lo >= self.hi:
            raise DomainError(f"empty similarity domain [{self.z_lo}, {self.z_hi}]")

    @property
    def lo(self) -> float:
        return -math.inf if isinstance(self.z_lo, Unbounded) else float(self.z_lo)

    @property
    def hi(self) -> float:
        return math.inf if isinstance(self.z_hi, Unbounded) else float(self.z_hi)

    def d_rho2(self, z):
        if self.rho2_prime is not None:
            return self.rho2_prime(z)
        return _fd_first(self.rho2, z)

    def d2_rho2(self, z):
        if self.rho2_second is not None:
            return self.rho2_second(z)
        return _fd_second(self.rho2, z)

    def d_rho1(self, z):
        if self.rho1_prime is not None:
            return self.rho1_prime(z)
        return _fd_first(self.rho1, z)

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return (z >= self.lo) & (z <= self.hi)

    def check_interior(self, n: int = 257) -> None:
        """Raise SingularityError if rho2 vanishes at sampled interior points."""
        lo = self.lo if np.isfinite(self.lo) else min(self.hi, 0.0) - 1e3
        hi = self.hi if np.isfinite(self.hi) else max(self.lo, 0.0) + 1e3
        z = np.linspace(lo, hi, n + 2)[1:-1]
        if np.any(np.abs(self.rho2(z)) < 1e-300):
            raise SingularityError("rho2 vanishes inside the similarity domain")


def _require_positive_time(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError(f"time must be strictly positive, got {t!r}")
    return t


def _out(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


def similarity_variable(x, t, alpha: float):
    """z = x / t**alpha."""
    t = _require_positive_time(t)
    return _out(np.asarray(x, dtype=float) / t ** alpha)


def density_from_profile(y_at_z, t, alpha: float):
    """W = t**(-alpha) * y(z)."""
    t = _require_positive_time(t)
    return _out(np.asarray(y_at_z, dtype=float) * t ** (-alpha))


def coefficients_at(problem: SimilarityProblem, x, t):
    """Physical drift and diffusion (D1, D2) at (x, t) from the profiles."""
    t = _require_positive_time(t)
    z = np.asarray(x, dtype=float) / t ** problem.alpha
    if not np.all(problem.contains(z)):
        raise DomainError("x / t**alpha lies outside the similarity domain")
    d1 = t ** (problem.alpha - 1.0) * problem.rho1(z)
    d2 = t ** (2.0 * problem.alpha - 1.0) * problem.rho2(z)
    return _out(d1), _out(d2)
