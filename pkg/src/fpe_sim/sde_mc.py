"""Monte Carlo sampling of the Ito SDE behind the Fokker-Planck equation.

The FPE  dW/dt = -d/dx(D1 W) + d2/dx2(D2 W)  is the forward equation of

    dX = D1(X, t) dt + sqrt(2 D2(X, t)) dB      (Ito)

Note the Ito reading: for x-dependent D2 the Stratonovich SDE with the same
coefficients has a different forward equation.

Paths are advanced by Euler-Maruyama with full truncation (coefficients
evaluated at X clipped into the current domain, so a square-root diffusion
never sees negative x) and elastic reflection at the walls, using the wall
positions at the post-step time.

Random numbers: paths are grouped in fixed blocks of ``BLOCK`` paths and
block k draws from Philox keyed by SeedSequence(seed, spawn_key=(k,)).
Every path's noise is therefore a function of (seed, path index) alone, and
results do not depend on how blocks are spread over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, InvalidStateError, ParameterError, SupportMismatchError
from .fpe_fd import FpeProblemSpec
from .field import DensityField
from .quadrature import quad

__all__ = ["McConfig", "simulate", "simulate_many", "l1_distance", "block_generator", "BLOCK"]

BLOCK = 8192
POLICIES = ("reflect", "clamp_reflect")
SUPPORT_TOL = 1e-3
MAX_FOLDS = 64


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    dt: float
    seed: int
    t_start: float
    boundary_policy: str = "reflect"
    bins: int = 64
    workers: int = 1

    def __post_init__(self):
        if self.n_paths < 1000:
            raise ConfigError("n_paths must be at least 1000")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.t_start > 0:
            raise ConfigError("t_start must be positive")
        if self.bins < 16:
            raise ConfigError("bins must be at least 16")
        if self.boundary_policy not in POLICIES:
            raise ConfigError(f"unknown boundary policy {self.boundary_policy!r}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


def block_generator(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def _inverse_cdf_sampler(spec: FpeProblemSpec, t0: float, n_grid: int = 8193):
    lo, hi = spec.domain.at(t0)
    if isinstance(spec.initial, DensityField):
        lo, hi = max(lo, spec.initial.x_lo), min(hi, spec.initial.x_hi)
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ConfigError("initial density on an unbounded domain needs a sampler")
    xs = np.linspace(lo, hi, n_grid)
    ws = np.maximum(spec.initial_at(xs), 0.0)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (ws[1:] + ws[:-1]) * np.diff(xs))])
    if not cdf[-1] > 0:
        raise ConfigError("initial density has no mass")
    cdf /= cdf[-1]

    def sample(rng, n, t):
        u = rng.random(n)
        # piecewise-linear density -> locally quadratic CDF; linear inverse is
        # accurate to O(h^2) which is far below histogram noise
        return np.interp(u, cdf, xs)

    return sample


def _fold(x, lo, hi, policy):
    for _ in range(MAX_FOLDS):
        below = x < lo
        above = x > hi
        if not (below.any() or above.any()):
            return x
        x = np.where(below, 2.0 * lo - x, x)
        x = np.where(above, 2.0 * hi - x, x)
        if policy == "clamp_reflect":
            return np.clip(x, lo, hi)
    return np.clip(x, lo, hi)


def _time_grid(t0: float, stops: Sequence[float], dt: float) -> list[np.ndarray]:
    """Per-segment step times; each segment uses the largest step <= dt."""
    out, a = [], t0
    for b in stops:
        if b == a:
            out.append(np.array([a]))
            continue
        n = max(1, math.ceil((b - a) / dt - 1e-9))
        ts = a + (b - a) * np.arange(n + 1) / n
        ts[-1] = b
        out.append(ts)
        a = b
    return out


def _run_blocks(spec, cfg, blocks, segments, sampler):
    """Advance the given blocks; returns a list (per stop) of position arrays."""
    gens, sizes = [], []
    for k in blocks:
        gens.append(block_generator(cfg.seed, k))
        sizes.append(min(BLOCK, cfg.n_paths - k * BLOCK))
    x = np.concatenate([sampler(g, n, cfg.t_start) for g, n in zip(gens, sizes)]).astype(float)
    lo, hi = spec.domain.at(cfg.t_start)
    x = _fold(x, lo, hi, cfg.boundary_policy)
    snaps = []
    for ts in segments:
        for t, t_next in zip(ts[:-1], ts[1:]):
            h = t_next - t
            xc = np.clip(x, lo, hi)
            d1 = np.asarray(spec.D1(xc, t), dtype=float)
            d2 = np.asarray(spec.D2(xc, t), dtype=float)
            if np.any(d2 < 0):
                raise ParameterError(f"negative diffusion D2 = {float(d2.min()):.3g} at t = {t:.6g}")
            xi = np.concatenate([g.standard_normal(n) for g, n in zip(gens, sizes)])
            x = x + d1 * h + np.sqrt(2.0 * d2 * h) * xi
            if not np.all(np.isfinite(x)):
                raise InvalidStateError(f"non-finite path value at t = {t_next:.6g}")
            lo, hi = spec.domain.at(t_next)
            x = _fold(x, lo, hi, cfg.boundary_policy)
        snaps.append(x.copy())
    return snaps


def _histogram(x: np.ndarray, t: float, lo: float, hi: float, bins: int) -> DensityField:
    if not np.isfinite(lo):
        lo = float(x.min())
    if not np.isfinite(hi):
        hi = float(x.max())
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(x, bins=edges)
    w = np.diff(edges)
    dens = counts / (x.size * w)
    return DensityField(t=float(t), xs=0.5 * (edges[1:] + edges[:-1]), ws=dens,
                        x_lo=float(lo), x_hi=float(hi), widths=w, counts=counts)


def simulate_many(spec: FpeProblemSpec, cfg: McConfig, times: Sequence[float]) -> list[DensityField]:
    """Histograms of X(t) at each of the increasing ``times`` (>= cfg.t_start)."""
    times = [float(t) for t in times]
    if not times or times[0] < cfg.t_start or any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigError("output times must be strictly increasing and not before t_start")
    if times[-1] > cfg.t_start and not cfg.dt < times[-1] - cfg.t_start:
        raise ConfigError("dt must be smaller than t_end - t_start")
    sampler = spec.sampler or _inverse_cdf_sampler(spec, cfg.t_start)
    segments = _time_grid(cfg.t_start, times, cfg.dt)
    nblocks = -(-cfg.n_paths // BLOCK)
    if cfg.workers == 1 or nblocks == 1:
        parts = [_run_blocks(spec, cfg, range(nblocks), segments, sampler)]
    else:
        chunks = [c for c in np.array_split(np.arange(nblocks), cfg.workers) if c.size]
        with ThreadPoolExecutor(max_workers=len(chunks)) as ex:
            parts = list(ex.map(lambda c: _run_blocks(spec, cfg, c, segments, sampler), chunks))
    out = []
    for i, t in enumerate(times):
        x = np.concatenate([p[i] for p in parts])
        lo, hi = spec.domain.at(t)
        out.append(_histogram(x, t, lo, hi, cfg.bins))
    return out


def simulate(spec: FpeProblemSpec, cfg: McConfig, t_end: float) -> DensityField:
    """Histogram density of X(t_end) over cfg.n_paths paths started at cfg.t_start."""
    return simulate_many(spec, cfg, [t_end])[0]


def _field_eval(f: DensityField, x: np.ndarray) -> np.ndarray:
    """Linear interpolation inside [x_lo, x_hi], edge values held, 0 outside."""
    v = np.interp(x, f.xs, f.ws)
    return np.where((x < f.x_lo) | (x > f.x_hi), 0.0, v)


def _inside_mass(analytic, t, lo, hi):
    """(reference mass inside [lo, hi], total reference mass)."""
    if isinstance(analytic, DensityField):
        if analytic.widths is not None:
            w = analytic.widths
            a = np.maximum(analytic.xs - 0.5 * w, lo)
            b = np.minimum(analytic.xs + 0.5 * w, hi)
            return float(np.sum(analytic.ws * np.maximum(b - a, 0.0))), analytic.mass()
        xs = analytic.xs
        pts = np.union1d(np.clip([analytic.x_lo, analytic.x_hi], lo, hi), xs[(xs > lo) & (xs < hi)])
        pts = np.union1d(pts, [lo, hi])
        return float(np.trapezoid(_field_eval(analytic, pts), pts)), analytic.mass()
    r = quad(lambda x: np.asarray(analytic(x, t), dtype=float), lo, hi,
             epsabs=1e-9, epsrel=1e-9)
    return r.value, 1.0


def l1_distance(empirical: DensityField, analytic: Union[Callable, DensityField],
                t: Optional[float] = None, check_support: bool = True) -> float:
    """sum |p_hat_i - p_i| dx_i between a histogram and a reference density.

    The reference is evaluated at bin centres and rescaled so its binned mass
    equals its true mass inside the histogram range; mass outside that range
    is added to the distance.  With ``check_support`` a reference losing more
    than 1e-3 of its mass outside the range raises SupportMismatchError.
    """
    t = empirical.t if t is None else float(t)
    w = empirical.cell_weights()
    if isinstance(analytic, DensityField):
        p = _field_eval(analytic, empirical.xs)
    else:
        p = np.asarray(analytic(empirical.xs, t), dtype=float)
    inside, total = _inside_mass(analytic, t, empirical.x_lo, empirical.x_hi)
    outside = max(0.0, total - inside)
    if check_support and outside > SUPPORT_TOL * total:
        raise SupportMismatchError(
            f"{outside / total:.3g} of the reference mass lies outside [{empirical.x_lo:.6g}, "
            f"{empirical.x_hi:.6g}]")
    binned = float(np.sum(p * w))
    if binned > 0:
        p = p * (inside / binned)
    return float(np.sum(np.abs(empirical.ws - p) * w) + outside)
