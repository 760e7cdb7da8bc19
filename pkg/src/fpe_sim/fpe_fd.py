"""Conservative finite-volume solver for the 1-D Fokker-Planck equation.

    dW/dt = -d/dx [ S ],      S = D1 W - d/dx (D2 W)

Cells carry point values of W at their centres.  The face current is
written as S = B W - D2 dW/dx with B = D1 - dD2/dx and discretised with the
Chang-Cooper (Scharfetter-Gummel) exponential weighting

    S_{i+1/2} = (D/dq) [ bern(-w) W_i - bern(w) W_{i+1} ],   w = B dq / D,
    bern(w) = w / (exp(w) - 1),

which is second order where the cell Peclet number is small, falls back to
upwinding where D -> 0, and keeps the off-diagonal couplings non-negative.
Boundary faces carry zero current (impenetrable walls), so the total mass
is conserved to round-off.

Boundaries of the form x_k(t) = z_k t**alpha are handled by solving in the
similarity frame (z, s = ln t), where they are fixed; no mesh motion is
involved.  In that frame V(z, s) = t**alpha W(z t**alpha, t) obeys an FPE
with drift t**(1-alpha) D1 - alpha z and diffusion t**(1-2 alpha) D2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigError, InstabilityError, QuadratureError
from .field import DensityField
from .quadrature import quad_segments
from .solutions import (
    BetaFamilyParams,
    GammaFamilyParams,
    boundary_positions,
    gamma_tail_cutoff,
)

__all__ = [
    "FixedDomain",
    "MovingDomain",
    "FdConfig",
    "FpeProblemSpec",
    "FrameProblem",
    "FdRun",
    "probability_current",
    "to_similarity_frame",
    "evolve",
    "convergence_study",
    "fitted_order",
    "l1_error",
    "family_spec",
    "discrete_steady_state",
]

SCHEMES = ("crank_nicolson", "explicit_upwind")
FRAMES = ("physical_fixed", "similarity_mapped")
BLOWUP_FACTOR = 1e6


@dataclass(frozen=True)
class FixedDomain:
    x_lo: float
    x_hi: float

    def at(self, t: float) -> tuple[float, float]:
        return self.x_lo, self.x_hi


@dataclass(frozen=True)
class MovingDomain:
    """Walls at z1 t**alpha and z2 t**alpha."""

    z1: float
    z2: float
    alpha: float

    def at(self, t: float) -> tuple[float, float]:
        s = t ** self.alpha
        return self.z1 * s, self.z2 * s


Domain = Union[FixedDomain, MovingDomain]


@dataclass(frozen=True)
class FdConfig:
    """Solver settings.

    ``cluster_scale`` grades the mesh geometrically towards the lower wall
    (face q_k = lo + c((1 + L/c)**(k/n) - 1)); None gives a uniform mesh.
    It is measured in the solver's own coordinate (x, or z in the
    similarity frame).
    """

    n_cells: int
    t_start: float
    t_end: float
    cfl_safety: float = 0.4
    scheme: str = "crank_nicolson"
    frame: str = "physical_fixed"
    cluster_scale: Optional[float] = None
    snapshot_times: tuple = ()

    def __post_init__(self):
        if self.n_cells < 16:
            raise ConfigError("n_cells must be at least 16")
        if not (0 < self.t_start < self.t_end):
            raise ConfigError("need 0 < t_start < t_end")
        if not (0 < self.cfl_safety <= 1):
            raise ConfigError("cfl_safety must lie in (0, 1]")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.frame not in FRAMES:
            raise ConfigError(f"unknown frame {self.frame!r}")
        if self.cluster_scale is not None and not self.cluster_scale > 0:
            raise ConfigError("cluster_scale must be positive")
        for ts in self.snapshot_times:
            if not (self.t_start <= ts <= self.t_end):
                raise ConfigError(f"snapshot time {ts} outside [t_start, t_end]")


@dataclass(frozen=True)
class FpeProblemSpec:
    """Drift D1(x, t), diffusion D2(x, t) >= 0, walls and initial density.

    A callable ``initial`` is averaged over each cell by quadrature; a
    DensityField is linearly interpolated to the cell centres.  ``exact`` (optional) is an analytic W(x, t) used for error
    reporting, and ``sampler(rng, n, t)`` (optional) draws initial positions
    for the Monte Carlo engine.  ``self_similar`` declares that D1 and D2
    have the exact similarity form t**(alpha-1) rho1(z), t**(2 alpha-1) rho2(z),
    which lets the similarity-frame solver reuse one operator for all s.
    """

    D1: Callable
    D2: Callable
    domain: Domain
    initial: Union[Callable, DensityField]
    exact: Optional[Callable] = None
    sampler: Optional[Callable] = None
    self_similar: bool = False

    def initial_at(self, x: np.ndarray) -> np.ndarray:
        if isinstance(self.initial, DensityField):
            f = self.initial
            return np.interp(x, f.xs, f.ws, left=0.0, right=0.0)
        return np.asarray(self.initial(x), dtype=float)


def probability_current(W, dWdx, D1, D2, dD2dx):
    """S = D1 W - (dD2/dx W + D2 dW/dx)."""
    return D1 * W - (dD2dx * W + D2 * dWdx)


@dataclass(frozen=True)
class FrameProblem:
    """FPE on a fixed interval [q_lo, q_hi] in time variable tau.

    For the physical frame q = x, tau = t; for the similarity frame q = z and
    tau = ln t.  ``to_physical`` maps (q-centres, values, tau) back to x, W, t.
    """

    drift: Callable
    diffusion: Callable
    q_lo: float
    q_hi: float
    tau_of_t: Callable
    t_of_tau: Callable
    initial: Callable
    to_physical: Callable
    scale_of_t: Callable


def to_similarity_frame(spec: FpeProblemSpec, t_start: float) -> FrameProblem:
    """Transform a moving-wall problem to the fixed interval [z1, z2] in s = ln t."""
    dom = spec.domain
    if not isinstance(dom, MovingDomain):
        raise ConfigError("similarity frame needs a moving domain z_k t**alpha")
    a = dom.alpha

    def drift(z, s):
        t = math.exp(s)
        return t ** (1.0 - a) * np.asarray(spec.D1(z * t ** a, t), dtype=float) - a * z

    def diffusion(z, s):
        t = math.exp(s)
        return t ** (1.0 - 2.0 * a) * np.asarray(spec.D2(z * t ** a, t), dtype=float)

    def initial(z):
        sc = t_start ** a
        return sc * spec.initial_at(z * sc)

    def to_physical(z, v, s):
        t = math.exp(s)
        sc = t ** a
        return z * sc, v / sc, t

    return FrameProblem(drift, diffusion, dom.z1, dom.z2, math.log, math.exp,
                        initial, to_physical, lambda t: t ** a)


def _physical_frame(spec: FpeProblemSpec) -> FrameProblem:
    dom = spec.domain
    if not isinstance(dom, FixedDomain):
        raise ConfigError("physical_fixed frame needs a fixed domain; "
                          "moving walls are solved in the similarity frame")
    return FrameProblem(
        drift=lambda x, t: np.asarray(spec.D1(x, t), dtype=float),
        diffusion=lambda x, t: np.asarray(spec.D2(x, t), dtype=float),
        q_lo=dom.x_lo,
        q_hi=dom.x_hi,
        tau_of_t=lambda t: t,
        t_of_tau=lambda tau: tau,
        initial=spec.initial_at,
        to_physical=lambda x, w, t: (x, w, t),
        scale_of_t=lambda t: 1.0,
    )


def make_faces(lo: float, hi: float, n: int, cluster_scale: Optional[float]) -> np.ndarray:
    xi = np.linspace(0.0, 1.0, n + 1)
    if cluster_scale is None:
        faces = lo + (hi - lo) * xi
    else:
        c = cluster_scale
        faces = lo + c * np.expm1(xi * math.log1p((hi - lo) / c))
    faces[0], faces[-1] = lo, hi
    return faces


def _bern(w: np.ndarray) -> np.ndarray:
    """w / (exp(w) - 1), with its limit 1 at w = 0."""
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        return np.where(np.abs(w) > 1e-8, w / np.expm1(w), 1.0 - 0.5 * w)


class _Grid:
    def __init__(self, faces: np.ndarray):
        self.faces = faces
        self.centres = 0.5 * (faces[1:] + faces[:-1])
        self.h = np.diff(faces)
        self.dc = np.diff(self.centres)
        self.inner = faces[1:-1]


def _face_coefficients(prob: FrameProblem, g: _Grid, tau: float, upwind: bool):
    """(cl, cr, dt_limit): face current S = cl W_left - cr W_right on interior faces.

    dt_limit is the explicit-stability proxy min dq**2 / (2 D + |B| dq).
    """
    dfc = prob.diffusion(g.inner, tau)
    if np.any(dfc < 0):
        raise ConfigError("diffusion coefficient is negative inside the domain")
    dcen = prob.diffusion(g.centres, tau)
    b = prob.drift(g.inner, tau) - np.diff(dcen) / g.dc
    denom = 2.0 * dfc + np.abs(b) * g.dc
    with np.errstate(divide="ignore"):
        limit = float(np.min(np.where(denom > 0, g.dc * g.dc / denom, np.inf)))
    if upwind:
        return np.maximum(b, 0.0) + dfc / g.dc, np.maximum(-b, 0.0) + dfc / g.dc, limit
    pos = dfc > 0
    w = np.where(pos, b * g.dc / np.where(pos, dfc, 1.0), 0.0)
    cl = np.where(pos, dfc / g.dc * _bern(-w), np.maximum(b, 0.0))
    cr = np.where(pos, dfc / g.dc * _bern(w), np.maximum(-b, 0.0))
    return cl, cr, limit


def _operator(prob: FrameProblem, g: _Grid, tau: float, upwind: bool = False):
    """(L, dt_limit): banded (3, n) matrix with dW/dtau = L W, solve_banded layout."""
    cl, cr, limit = _face_coefficients(prob, g, tau, upwind)
    n = g.centres.size
    ab = np.zeros((3, n))
    # face k sits between cells k and k+1: it removes S/h_k from k and adds S/h_{k+1} to k+1
    ab[1, :-1] -= cl / g.h[:-1]
    ab[0, 1:] += cr / g.h[:-1]
    ab[1, 1:] -= cr / g.h[1:]
    ab[2, :-1] += cl / g.h[1:]
    return ab, limit


def _apply(ab: np.ndarray, v: np.ndarray) -> np.ndarray:
    r = ab[1] * v
    r[:-1] += ab[0, 1:] * v[1:]
    r[1:] += ab[2, :-1] * v[:-1]
    return r


@dataclass
class FdRun:
    final: DensityField
    snapshots: list = field(default_factory=list)
    steps: int = 0
    max_mass_drift: float = 0.0
    min_value: float = 0.0


def _to_field(prob: FrameProblem, g: _Grid, v: np.ndarray, tau: float) -> DensityField:
    xs, ws, t = prob.to_physical(g.centres, v, tau)
    sc = prob.scale_of_t(t)
    lo, _, _ = prob.to_physical(np.array([prob.q_lo]), np.zeros(1), tau)
    hi, _, _ = prob.to_physical(np.array([prob.q_hi]), np.zeros(1), tau)
    return DensityField(t=float(t), xs=xs, ws=np.maximum(ws, 0.0),
                        x_lo=float(lo[0]), x_hi=float(hi[0]), widths=g.h * sc)


def _initial_cells(spec: FpeProblemSpec, prob: FrameProblem, g: _Grid) -> np.ndarray:
    """Cell averages of an analytic initial density; tabulated data is point-sampled."""
    if not isinstance(spec.initial, DensityField):
        try:
            return quad_segments(prob.initial, g.faces[:-1], g.faces[1:],
                                 epsabs=1e-13, epsrel=1e-12) / g.h
        except QuadratureError:
            pass
    return np.asarray(prob.initial(g.centres), dtype=float)


def _frame_for(spec: FpeProblemSpec, cfg: FdConfig) -> FrameProblem:
    if cfg.frame == "physical_fixed":
        return _physical_frame(spec)
    return to_similarity_frame(spec, cfg.t_start)


def evolve(spec: FpeProblemSpec, cfg: FdConfig) -> FdRun:
    """Integrate from cfg.t_start to cfg.t_end; snapshots at cfg.snapshot_times."""
    prob = _frame_for(spec, cfg)
    g = _Grid(make_faces(prob.q_lo, prob.q_hi, cfg.n_cells, cfg.cluster_scale))
    v = _initial_cells(spec, prob, g)
    if not np.all(np.isfinite(v)):
        raise ConfigError("initial density is not finite on the grid")
    tau = prob.tau_of_t(cfg.t_start)
    tau_end = prob.tau_of_t(cfg.t_end)
    snap_taus = {prob.tau_of_t(ts) for ts in cfg.snapshot_times}
    stops = sorted(snap_taus | {tau_end})
    mass0 = float(np.sum(v * g.h))
    vmax0 = float(np.max(np.abs(v))) or 1.0
    explicit = cfg.scheme == "explicit_upwind"
    # exact similarity coefficients do not depend on s in the similarity frame
    frozen = spec.self_similar and cfg.frame == "similarity_mapped"

    run = FdRun(final=None)  # type: ignore[arg-type]
    run.min_value = float(np.min(v))
    op_now, lim_now = _operator(prob, g, tau, upwind=explicit)
    for stop in stops:
        while tau < stop:
            dt = cfg.cfl_safety * lim_now
            remaining = stop - tau
            if dt >= remaining or remaining - dt < 1e-12 * max(1.0, abs(stop)):
                dt, tau_next = remaining, stop
            else:
                tau_next = tau + dt
            if explicit:
                v = v + dt * _apply(op_now, v)
                if not frozen:
                    op_now, lim_now = _operator(prob, g, tau_next, upwind=True)
            else:
                op_next, lim_next = (op_now, lim_now) if frozen else _operator(prob, g, tau_next)
                rhs = v + 0.5 * dt * _apply(op_now, v)
                m = -0.5 * dt * op_next
                m[1] += 1.0
                v = solve_banded((1, 1), m, rhs, check_finite=False)
                op_now, lim_now = op_next, lim_next
            tau = tau_next
            run.steps += 1
            vmax = float(np.max(np.abs(v)))
            if not np.isfinite(vmax) or vmax > BLOWUP_FACTOR * vmax0:
                raise InstabilityError(
                    f"density blew up (max {vmax:.3g}) at t = {prob.t_of_tau(tau):.6g}")
            run.min_value = min(run.min_value, float(np.min(v)))
            run.max_mass_drift = max(run.max_mass_drift, abs(float(np.sum(v * g.h)) - mass0))
        if stop in snap_taus:
            run.snapshots.append(_to_field(prob, g, v, tau))
    run.final = _to_field(prob, g, v, tau)
    return run


def discrete_steady_state(spec: FpeProblemSpec, cfg: FdConfig, t: float) -> DensityField:
    """Zero-current state of the Crank-Nicolson/Chang-Cooper operator at time t.

    Every interior face balances cl W_i = cr W_{i+1}; the state is normalised
    to unit mass.
    """
    prob = _frame_for(spec, cfg)
    g = _Grid(make_faces(prob.q_lo, prob.q_hi, cfg.n_cells, cfg.cluster_scale))
    tau = prob.tau_of_t(t)
    cl, cr, _ = _face_coefficients(prob, g, tau, upwind=False)
    with np.errstate(divide="ignore"):
        logr = np.log(cl) - np.log(cr)
    logv = np.concatenate([[0.0], np.cumsum(logr)])
    v = np.exp(logv - np.max(logv))
    v /= np.sum(v * g.h)
    return _to_field(prob, g, v, tau)


def l1_error(fld: DensityField, exact: Callable) -> float:
    """sum |W_i - exact(x_i, t)| w_i with the field's own cell weights."""
    ref = np.asarray(exact(fld.xs, fld.t), dtype=float)
    return float(np.sum(np.abs(fld.ws - ref) * fld.cell_weights()))


def convergence_study(spec: FpeProblemSpec, cfg: FdConfig, levels: Sequence[int],
                      exact: Optional[Callable] = None) -> list[tuple[int, float]]:
    """L1 error at cfg.t_end against the analytic density for each n_cells."""
    exact = exact or spec.exact
    if exact is None:
        raise ConfigError("convergence study needs an analytic reference")
    out = []
    for n in levels:
        c = FdConfig(n_cells=int(n), t_start=cfg.t_start, t_end=cfg.t_end,
                     cfl_safety=cfg.cfl_safety, scheme=cfg.scheme, frame=cfg.frame,
                     cluster_scale=cfg.cluster_scale)
        out.append((int(n), l1_error(evolve(spec, c).final, exact)))
    return out


def fitted_order(study: Sequence[tuple[int, float]]) -> float:
    """Least-squares slope of -log(error) against log(n_cells)."""
    n = np.log([s[0] for s in study])
    e = np.log([s[1] for s in study])
    return float(-np.polyfit(n, e, 1)[0])


def family_spec(params, t_start: float, t_end: float, frame: str = "physical_fixed",
                tail: float = 1e-10, truncate: bool = True) -> FpeProblemSpec:
    """FpeProblemSpec for a closed-form family, initialised at t_start.

    The gamma family is truncated where its analytic tail mass drops below
    ``tail`` at every time in [t_start, t_end]; in the similarity frame that
    cut is a fixed z.  ``truncate=False`` keeps the half-line [0, inf), which
    only the Monte Carlo engine can use.
    """
    if isinstance(params, GammaFamilyParams):
        params.validate()
        if not truncate:
            domain: Domain = FixedDomain(0.0, math.inf)
        elif frame == "physical_fixed":
            x_max = max(gamma_tail_cutoff(params, t_start, tail),
                        gamma_tail_cutoff(params, t_end, tail))
            domain = FixedDomain(0.0, x_max)
        else:
            z_max = gamma_tail_cutoff(params, 1.0, tail)
            domain = MovingDomain(0.0, z_max, params.alpha)
        k, rate = params.shape, params.rate

        def sampler(rng, n, t):
            return rng.gamma(k, 1.0 / (rate / t ** params.alpha), size=n)
    elif isinstance(params, BetaFamilyParams):
        params.validate()
        domain = MovingDomain(params.z1, params.z2, params.alpha)

        def sampler(rng, n, t):
            u = rng.beta(params.a1 + 1.0, params.a2 + 1.0, size=n)
            lo, hi = boundary_positions(params, t)
            return lo + (hi - lo) * u
    else:
        raise ConfigError(f"unknown family {type(params).__name__}")
    return FpeProblemSpec(
        D1=params.drift,
        D2=params.diffusion,
        domain=domain,
        initial=lambda x: params.density(x, t_start),
        exact=params.density,
        sampler=sampler,
        self_similar=True,
    )
