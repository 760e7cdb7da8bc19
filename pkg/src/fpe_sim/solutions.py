"""Zero-flux similarity profiles and the two closed-form families.

With W = t**(-alpha) y(z) the Fokker-Planck equation reduces to

    rho2 y'' + (2 rho2' - rho1 + alpha z) y' + (rho2'' - rho1' + alpha) y = 0

whose first integral is ``rho2 y' + (rho2' - rho1 + alpha z) y = C``.  An
impenetrable boundary forces C = 0, which leaves

    y(z) = A exp(int f),    f = (rho1 - rho2' - alpha z) / rho2.

:func:`solve_profile` evaluates that quadrature numerically for arbitrary
profiles; :class:`GammaFamilyParams` and :class:`BetaFamilyParams` give the
half-line and moving-boundary cases in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DomainError,
    NonNormalizableError,
    ParameterError,
    QuadratureError,
    SingularityError,
)
from .field import DensityField
from .quadrature import quad, quad_segments
from .scaling import SimilarityProblem, _require_positive_time
from .special import log_beta, log_gamma

__all__ = [
    "f_from_profiles",
    "reduced_ode_residual",
    "first_integral_residual",
    "ProfileSolution",
    "solve_profile",
    "default_anchor",
    "GammaFamilyParams",
    "BetaFamilyParams",
    "gamma_family_density",
    "gamma_family_peak",
    "gamma_tail_cutoff",
    "beta_normalization_constant",
    "beta_family_density",
    "boundary_positions",
    "analytic_field",
]

_RHO2_FLOOR = 1e-300
QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-10


def _scalar_or_array(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


def f_from_profiles(problem: SimilarityProblem, z):
    """(rho1 - rho2' - alpha z) / rho2, the log-derivative of a zero-flux profile."""
    z = np.asarray(z, dtype=float)
    r2 = np.asarray(problem.rho2(z), dtype=float)
    if np.any(np.abs(r2) < _RHO2_FLOOR):
        raise SingularityError("rho2 vanishes; f(z) is undefined there")
    num = problem.rho1(z) - problem.d_rho2(z) - problem.alpha * z
    return _scalar_or_array(num / r2)


def reduced_ode_residual(problem: SimilarityProblem, y, yp, ypp, z):
    """Left-hand side of the second-order similarity ODE; 0 for exact solutions."""
    z = np.asarray(z, dtype=float)
    r2 = problem.rho2(z)
    r2p = problem.d_rho2(z)
    r2pp = problem.d2_rho2(z)
    r1 = problem.rho1(z)
    r1p = problem.d_rho1(z)
    a = problem.alpha
    res = r2 * ypp + (2 * r2p - r1 + a * z) * yp + (r2pp - r1p + a) * y
    return _scalar_or_array(res)


def first_integral_residual(problem: SimilarityProblem, y, yp, z):
    """rho2 y' + (rho2' - rho1 + alpha z) y, i.e. the constant C (0 at zero flux)."""
    z = np.asarray(z, dtype=float)
    res = problem.rho2(z) * yp + (problem.d_rho2(z) - problem.rho1(z) + problem.alpha * z) * y
    return _scalar_or_array(res)


def default_anchor(problem: SimilarityProblem) -> float:
    """Interior reference point where the antiderivative of f is set to 0."""
    lo, hi = problem.lo, problem.hi
    if np.isfinite(lo) and np.isfinite(hi):
        return 0.5 * (lo + hi)
    if np.isfinite(lo):
        return lo + 1.0
    if np.isfinite(hi):
        return hi - 1.0
    return 0.0


def _endpoint_exponent(problem: SimilarityProblem, end: float, side: int) -> float:
    """p with y ~ |z - end|**p near a finite endpoint (side=-1 lower, +1 upper)."""
    width = (problem.hi - problem.lo) if np.isfinite(problem.hi - problem.lo) else 1.0
    d = 1e-9 * max(width, abs(end), 1.0)
    z = end - side * d
    return float(-side * d * f_from_profiles(problem, z))


@dataclass(frozen=True)
class ProfileSolution:
    """Normalised zero-flux profile y(z) = A exp(log_y_unnorm(z)).

    ``log_y_unnorm`` is the integral of f from ``anchor`` to z.  The first
    integration constant is 0 (impenetrable boundaries) and the second is
    absorbed into ``A``.
    """

    problem: SimilarityProblem
    anchor: float
    log_A: float
    integration_constant: float = 0.0

    @property
    def A(self) -> float:
        return math.exp(self.log_A)

    @property
    def domain(self) -> tuple[float, float]:
        return self.problem.lo, self.problem.hi

    def f(self, z):
        return f_from_profiles(self.problem, z)

    def _f_array(self, z):
        return np.asarray(f_from_profiles(self.problem, z), dtype=float)

    def log_y_unnorm(self, z):
        z = np.asarray(z, dtype=float)
        flat = z.ravel()
        out = np.zeros_like(flat)
        lo, hi = self.problem.lo, self.problem.hi
        if np.any((flat < lo) | (flat > hi)) or np.any(np.isnan(flat)):
            raise DomainError("z outside the similarity domain")
        at_lo = flat == lo
        at_hi = flat == hi
        interior = ~(at_lo | at_hi)
        above = interior & (flat > self.anchor)
        below = interior & (flat < self.anchor)
        if np.any(above):
            pts, inv = np.unique(flat[above], return_inverse=True)
            starts = np.concatenate([[self.anchor], pts[:-1]])
            seg = quad_segments(self._f_array, starts, pts, 1e-12, 1e-12)
            out[above] = np.cumsum(seg)[inv]
        if np.any(below):
            pts, inv = np.unique(flat[below], return_inverse=True)
            ends = np.concatenate([pts[1:], [self.anchor]])
            seg = quad_segments(self._f_array, pts, ends, 1e-12, 1e-12)
            out[below] = -np.cumsum(seg[::-1])[::-1][inv]
        for mask, end, side in ((at_lo, lo, -1), (at_hi, hi, +1)):
            if np.any(mask):
                out[mask] = self._log_y_at_end(end, side)
        return _scalar_or_array(out.reshape(z.shape))

    def _log_y_at_end(self, end: float, side: int) -> float:
        p = _endpoint_exponent(self.problem, end, side)
        if p > 1e-8:
            return -math.inf
        if p < -1e-8:
            return math.inf
        r = quad(self._f_array, self.anchor, end, 1e-12, 1e-12)
        return r.value

    def log_y(self, z):
        return _scalar_or_array(self.log_A + np.asarray(self.log_y_unnorm(z)))

    def y(self, z):
        with np.errstate(over="ignore"):
            return _scalar_or_array(np.exp(np.asarray(self.log_y(z))))


def _outer_pieces(problem: SimilarityProblem, anchor: float):
    """(mapped integrand factory, u_lo, u_hi) covering the whole domain."""
    lo, hi = problem.lo, problem.hi
    pieces = []
    ident = (lambda u: u, lambda u: np.ones_like(u))
    right = (lambda u: anchor + u / (1.0 - u), lambda u: 1.0 / (1.0 - u) ** 2)
    left = (lambda u: anchor - u / (1.0 - u), lambda u: 1.0 / (1.0 - u) ** 2)
    if np.isfinite(lo):
        pieces.append((ident, lo, anchor))
    else:
        pieces.append((left, 0.0, 1.0))
    if np.isfinite(hi):
        pieces.append((ident, anchor, hi))
    else:
        pieces.append((right, 0.0, 1.0))
    return pieces


def solve_profile(problem: SimilarityProblem, quadrature_points: int = 201,
                  anchor: Optional[float] = None) -> ProfileSolution:
    """Normalised zero-flux profile by adaptive quadrature.

    ``quadrature_points`` interior probes locate the largest value of the
    unnormalised profile so the normalisation integral is formed without
    overflow.  Raises NonNormalizableError when the profile has no finite
    integral over the domain.
    """
    if anchor is None:
        anchor = default_anchor(problem)
    if not (problem.lo < anchor < problem.hi):
        raise DomainError("anchor must be an interior point")
    for end, side in ((problem.lo, -1), (problem.hi, +1)):
        if np.isfinite(end):
            p = _endpoint_exponent(problem, end, side)
            if p <= -1.0 + 1e-9:
                raise NonNormalizableError(
                    f"profile behaves like |z - {end}|^{p:.6g} at the boundary")
    sol = ProfileSolution(problem, anchor, 0.0)
    pieces = _outer_pieces(problem, anchor)

    probes = []
    for (zmap, _), u0, u1 in pieces:
        u = np.linspace(u0, u1, quadrature_points + 2)[1:-1]
        probes.append(zmap(u))
    try:
        shift = float(np.max(sol.log_y_unnorm(np.concatenate(probes))))
    except QuadratureError as exc:
        raise NonNormalizableError(f"profile could not be evaluated: {exc}") from exc
    if not np.isfinite(shift):
        raise NonNormalizableError("profile overflows inside the domain")

    total = 0.0
    for (zmap, jac), u0, u1 in pieces:
        def integrand(u, zmap=zmap, jac=jac):
            z = zmap(u)
            return np.exp(np.asarray(sol.log_y_unnorm(z)) - shift) * jac(u)
        try:
            total += quad(integrand, u0, u1, QUAD_EPSABS, QUAD_EPSREL).value
        except (QuadratureError, DomainError) as exc:
            raise NonNormalizableError(f"normalisation integral did not converge: {exc}") from exc
    if not (np.isfinite(total) and total > 0):
        raise NonNormalizableError("normalisation integral is not a positive finite number")
    return ProfileSolution(problem, anchor, -shift - math.log(total))


# ---------------------------------------------------------------------------
# half-line gamma family: rho1 = mu1 z + mu2, rho2 = mu3 z on [0, inf)


@dataclass(frozen=True)
class GammaFamilyParams:
    mu1: float
    mu2: float
    mu3: float
    alpha: float

    @property
    def shape(self) -> float:
        """kappa = mu2 / mu3."""
        return self.mu2 / self.mu3

    @property
    def rate(self) -> float:
        """(alpha - mu1) / mu3, the decay rate of the profile at t = 1."""
        return (self.alpha - self.mu1) / self.mu3

    def rate_at(self, t):
        return self.rate / np.asarray(t, dtype=float) ** self.alpha

    def validate(self) -> None:
        if self.mu3 == 0:
            raise ParameterError("mu3 must be nonzero")
        if not self.rate > 0:
            raise ParameterError(f"(alpha - mu1)/mu3 = {self.rate!r} must be positive")
        if not self.shape >= 1.0:
            raise ParameterError(f"mu2/mu3 = {self.shape!r} must be at least 1")

    def diagnostics(self) -> list[str]:
        notes = []
        if self.mu3 != 0 and self.rate > 0 and 0 < self.shape < 1:
            notes.append("outside the validity range mu2/mu3 >= 1 but integrable: W unbounded at x = 0")
        return notes

    def rho1(self, z):
        return self.mu1 * np.asarray(z, dtype=float) + self.mu2

    def rho2(self, z):
        return self.mu3 * np.asarray(z, dtype=float)

    def similarity_problem(self) -> SimilarityProblem:
        mu1, mu3 = self.mu1, self.mu3
        return SimilarityProblem(
            rho1=self.rho1,
            rho2=self.rho2,
            alpha=self.alpha,
            z_lo=0.0,
            rho2_prime=lambda z: np.full_like(np.asarray(z, dtype=float), mu3),
            rho2_second=lambda z: np.zeros_like(np.asarray(z, dtype=float)),
            rho1_prime=lambda z: np.full_like(np.asarray(z, dtype=float), mu1),
        )

    def log_profile(self, z):
        """log y(z) of the normalised t = 1 profile (a gamma density)."""
        k, lam = self.shape, self.rate
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = k * math.log(lam) - log_gamma(k) + (k - 1.0) * np.log(z) - lam * z
        if k == 1.0:
            out = np.where(z == 0, math.log(lam), out)
        return out

    def profile(self, z):
        return np.exp(self.log_profile(z))

    def profile_derivatives(self, z):
        """(y, y', y'') of the closed-form profile, differentiated by hand."""
        z = np.asarray(z, dtype=float)
        k, lam = self.shape, self.rate
        y = self.profile(z)
        g = (k - 1.0) / z - lam
        return y, y * g, y * (g * g - (k - 1.0) / z ** 2)

    def drift(self, x, t):
        """D1(x, t) = mu1 x / t + mu2 t**(alpha - 1)."""
        t = np.asarray(t, dtype=float)
        return self.mu1 * np.asarray(x, dtype=float) / t + self.mu2 * t ** (self.alpha - 1.0)

    def diffusion(self, x, t):
        """D2(x, t) = mu3 x t**(alpha - 1)."""
        t = np.asarray(t, dtype=float)
        return self.mu3 * np.asarray(x, dtype=float) * t ** (self.alpha - 1.0)

    def density(self, x, t):
        return gamma_family_density(self, x, t)


def gamma_family_density(p: GammaFamilyParams, x, t):
    """lam**k / Gamma(k) x**(k-1) exp(-lam x) with k = mu2/mu3, lam = (alpha-mu1)/(mu3 t**alpha)."""
    p.validate()
    t = _require_positive_time(t)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise DomainError("gamma family lives on x >= 0")
    k = p.shape
    lam = p.rate_at(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        logw = k * np.log(lam) - log_gamma(k) + (k - 1.0) * np.log(x) - lam * x
    w = np.exp(logw)
    if k == 1.0:
        w = np.where(x == 0, lam * np.ones_like(w), w)
    else:
        w = np.where(x == 0, 0.0, w)
    return _scalar_or_array(w)


def gamma_family_peak(p: GammaFamilyParams, t) -> tuple[float, float]:
    """Location and height of the maximum in the exponential case mu2 = mu3."""
    p.validate()
    if not math.isclose(p.mu2, p.mu3, rel_tol=1e-12, abs_tol=0.0):
        raise ParameterError("peak formula needs mu2 == mu3")
    t = float(_require_positive_time(t))
    return 0.0, abs((p.mu1 - p.alpha) / (p.mu3 * t ** p.alpha))


def gamma_tail_cutoff(p: GammaFamilyParams, t: float, tail: float = 1e-10) -> float:
    """X with analytic mass beyond X equal to ``tail``."""
    from scipy.special import gammainccinv

    p.validate()
    return float(gammainccinv(p.shape, tail) / p.rate_at(t))


# ---------------------------------------------------------------------------
# moving-boundary beta family on [z1, z2]


@dataclass(frozen=True)
class BetaFamilyParams:
    z1: float
    z2: float
    a1: float
    a2: float
    alpha: float

    def validate(self) -> None:
        if not self.z1 < self.z2:
            raise ParameterError("need z1 < z2")
        if not (self.a1 > 0 and self.a2 > 0):
            raise ParameterError("need a1 > 0 and a2 > 0")

    @property
    def subclass(self) -> str:
        """'i' (same-sign ends), 'ii' (one end at the origin) or 'iii' (straddles 0)."""
        if self.z1 == 0 or self.z2 == 0:
            return "ii"
        if self.z1 * self.z2 > 0:
            return "i"
        return "iii"

    @property
    def mode(self) -> float:
        return (self.a1 * self.z2 + self.a2 * self.z1) / (self.a1 + self.a2)

    def _inside(self, z):
        return (z >= self.z1) & (z <= self.z2)

    def rho2(self, z):
        z = np.asarray(z, dtype=float)
        return np.where(self._inside(z), (z - self.z1) * (self.z2 - z), 0.0)

    def rho1(self, z):
        z = np.asarray(z, dtype=float)
        lin = ((self.alpha - self.a1 - self.a2 - 2.0) * z
               + (self.a1 + 1.0) * self.z2 + (self.a2 + 1.0) * self.z1)
        return np.where(self._inside(z), lin, 0.0)

    def similarity_problem(self) -> SimilarityProblem:
        z1, z2 = self.z1, self.z2
        slope = self.alpha - self.a1 - self.a2 - 2.0
        return SimilarityProblem(
            rho1=self.rho1,
            rho2=self.rho2,
            alpha=self.alpha,
            z_lo=z1,
            z_hi=z2,
            rho2_prime=lambda z: z1 + z2 - 2.0 * np.asarray(z, dtype=float),
            rho2_second=lambda z: np.full_like(np.asarray(z, dtype=float), -2.0),
            rho1_prime=lambda z: np.full_like(np.asarray(z, dtype=float), slope),
        )

    def log_profile(self, z):
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (_log_beta_norm(self) + self.a1 * np.log(z - self.z1)
                   + self.a2 * np.log(self.z2 - z))
        return np.where((z > self.z1) & (z < self.z2), out, -np.inf)

    def profile(self, z):
        return np.exp(self.log_profile(z))

    def profile_derivatives(self, z):
        z = np.asarray(z, dtype=float)
        u, v = z - self.z1, self.z2 - z
        y = self.profile(z)
        g = self.a1 / u - self.a2 / v
        return y, y * g, y * (g * g - self.a1 / u ** 2 - self.a2 / v ** 2)

    def boundaries(self, t):
        return boundary_positions(self, t)

    def drift(self, x, t):
        t = np.asarray(t, dtype=float)
        return t ** (self.alpha - 1.0) * self.rho1(np.asarray(x, dtype=float) / t ** self.alpha)

    def diffusion(self, x, t):
        t = np.asarray(t, dtype=float)
        return t ** (2.0 * self.alpha - 1.0) * self.rho2(np.asarray(x, dtype=float) / t ** self.alpha)

    def density(self, x, t):
        return beta_family_density(self, x, t)


def _log_beta_norm(p: BetaFamilyParams) -> float:
    return -((p.a1 + p.a2 + 1.0) * math.log(p.z2 - p.z1) + log_beta(p.a1 + 1.0, p.a2 + 1.0))


def beta_normalization_constant(p: BetaFamilyParams) -> float:
    """A = [(z2 - z1)**(a1 + a2 + 1) B(a1 + 1, a2 + 1)]**-1."""
    p.validate()
    return math.exp(_log_beta_norm(p))


def boundary_positions(p: BetaFamilyParams, t) -> tuple[float, float]:
    t = float(_require_positive_time(t))
    s = t ** p.alpha
    return p.z1 * s, p.z2 * s


def beta_family_density(p: BetaFamilyParams, x, t):
    """Piecewise W: (A / t**alpha)(z - z1)**a1 (z2 - z)**a2 inside the moving support, else 0."""
    p.validate()
    t = _require_positive_time(t)
    s = t ** p.alpha
    z = np.asarray(x, dtype=float) / s
    w = np.exp(p.log_profile(z)) / s
    return _scalar_or_array(w)


def analytic_field(params, t: float, n_points: int = 4001, tail: float = 1e-10) -> DensityField:
    """Sample a family density on a grid suited to trapezoidal integration.

    The beta grid is Chebyshev-Lobatto on the support, whose clustering at
    the ends tames the algebraic endpoint behaviour.  The gamma grid is
    uniform in u = 1 - exp(-rate x / 3) and ends where the analytic tail mass
    is ``tail``; its spacing grows with x as the density decays.
    """
    t = float(t)
    s = np.linspace(0.0, 1.0, n_points)
    if isinstance(params, GammaFamilyParams):
        lo, hi = 0.0, gamma_tail_cutoff(params, t, tail)
        x_lo, x_hi = 0.0, math.inf
        c = 3.0 / float(params.rate_at(t))
        xs = -c * np.log1p(-s * -np.expm1(-hi / c))
    elif isinstance(params, BetaFamilyParams):
        lo, hi = boundary_positions(params, t)
        x_lo, x_hi = lo, hi
        xs = lo + (hi - lo) * 0.5 * (1.0 - np.cos(math.pi * s))
    else:
        raise TypeError(f"unknown family {type(params).__name__}")
    xs[0], xs[-1] = lo, hi
    ws = np.asarray(params.density(xs, t), dtype=float)
    return DensityField(t=t, xs=xs, ws=ws, x_lo=x_lo, x_hi=x_hi if math.isfinite(x_hi) else hi)
