"""The eight acceptance checks, shared by `fpe-sim verify` and the test suite.

Each check returns a CriterionResult; a check passes only if its numerical
condition holds and it finishes inside its runtime budget.
"""

from __future__ import annotations

import csv
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .fpe_fd import FdConfig, convergence_study, evolve, family_spec, fitted_order, l1_error
from .quadrature import quad
from .scaling import ScalingIndices, SimilarityProblem, coefficients_at, density_from_profile, similarity_variable
from .scenarios import builtin_scenarios, csv_name, run_scenario
from .sde_mc import McConfig, l1_distance, simulate
from .solutions import (
    BetaFamilyParams,
    GammaFamilyParams,
    first_integral_residual,
    reduced_ode_residual,
    solve_profile,
)
from .special import beta_fn, log_gamma

__all__ = ["CriterionResult", "CRITERIA", "run_all", "FIG1", "FIG2",
           "random_gamma_params", "random_beta_params"]

FIG1 = GammaFamilyParams(mu1=-3.0, mu2=0.5, mu3=0.5, alpha=-2.0)
FIG2 = BetaFamilyParams(z1=1.0, z2=4.0, a1=1.0 / 3.0, a2=0.5, alpha=-2.0)
SEED = 20240601


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float
    budget: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] criterion {self.number}: {self.title} | {self.detail} | "
                f"{self.seconds:.2f} s (budget {self.budget:g} s)")


def _timed(number: int, title: str, budget: float, body: Callable[[], tuple[bool, str]]):
    t0 = time.perf_counter()
    ok, detail = body()
    dt = time.perf_counter() - t0
    if dt >= budget:
        ok, detail = False, detail + f"; over runtime budget"
    return CriterionResult(number, title, bool(ok), detail, dt, budget)


def random_gamma_params(rng: np.random.Generator) -> GammaFamilyParams:
    mu3 = rng.uniform(0.1, 2.0)
    kappa = rng.uniform(1.0, 5.0)
    alpha = rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 3.0)
    rate = rng.uniform(0.2, 5.0)
    return GammaFamilyParams(mu1=alpha - rate * mu3, mu2=kappa * mu3, mu3=mu3, alpha=alpha)


def random_beta_params(rng: np.random.Generator) -> BetaFamilyParams:
    z1 = rng.uniform(-3.0, 3.0)
    z2 = z1 + rng.uniform(0.5, 5.0)
    alpha = rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 3.0)
    return BetaFamilyParams(z1=z1, z2=z2, a1=rng.uniform(0.1, 4.0), a2=rng.uniform(0.1, 4.0),
                            alpha=alpha)


def interior_points(p, rng: np.random.Generator, n: int = 32) -> np.ndarray:
    if isinstance(p, GammaFamilyParams):
        # bulk of the gamma profile: z up to mean + 10 standard deviations
        hi = (p.shape + 10.0 * math.sqrt(p.shape)) / p.rate
        return rng.uniform(1e-3 * hi, hi, n)
    w = p.z2 - p.z1
    return rng.uniform(p.z1 + 1e-3 * w, p.z2 - 1e-3 * w, n)


def residuals(p, z: np.ndarray) -> tuple[float, float]:
    """Max relative first-integral and reduced-ODE residuals of the analytic profile."""
    prob = p.similarity_problem()
    y, yp, ypp = p.profile_derivatives(z)
    r1, r2 = prob.rho1(z), prob.rho2(z)
    d2, dd2, d1 = prob.d_rho2(z), prob.d2_rho2(z), prob.d_rho1(z)
    a = prob.alpha
    fi = first_integral_residual(prob, y, yp, z)
    fi_scale = np.maximum(np.abs(r2 * yp), np.abs((d2 - r1 + a * z) * y))
    ode = reduced_ode_residual(prob, y, yp, ypp, z)
    ode_scale = np.maximum.reduce([np.abs(r2 * ypp), np.abs((2 * d2 - r1 + a * z) * yp),
                                   np.abs((dd2 - d1 + a) * y)])
    ok = fi_scale > 0
    return (float(np.max(np.abs(fi[ok]) / fi_scale[ok])),
            float(np.max(np.abs(ode[ok]) / ode_scale[ok])))


def _read_curve(path: Path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return (np.array([float(r["x"]) for r in rows]), np.array([float(r["W"]) for r in rows]))


def criterion_1() -> CriterionResult:
    def body():
        sc = builtin_scenarios()["fig1"]
        with tempfile.TemporaryDirectory() as d:
            res = run_scenario(sc.with_overrides(out_dir=d))
            peaks, worst_peak, worst_shape = [], 0.0, 0.0
            for t in sc.times:
                xs, ws = _read_curve(Path(d) / csv_name(sc.name, "analytic", t))
                want = 2.0 * t * t
                i = int(np.argmax(ws))
                if xs[i] != 0.0:
                    return False, f"peak at x = {xs[i]!r} for t = {t}"
                peaks.append(ws[i])
                worst_peak = max(worst_peak, abs(ws[i] - want) / want)
                ref = want * np.exp(-want * xs)
                keep = ref > 1e-300
                worst_shape = max(worst_shape, float(np.max(np.abs(ws[keep] - ref[keep]) / ref[keep])))
        increasing = all(b > a for a, b in zip(peaks, peaks[1:]))
        ok = res.passed and worst_peak <= 1e-10 and worst_shape <= 1e-10 and increasing
        return ok, (f"peaks {', '.join(f'{v:.12g}' for v in peaks)}; rel err {worst_peak:.1e}; "
                    f"exponential shape err {worst_shape:.1e}; increasing {increasing}")
    return _timed(1, "fig1 peak values 2 t^2 at x = 0", 1.0, body)


def criterion_2() -> CriterionResult:
    def body():
        sc = builtin_scenarios()["fig2"]
        with tempfile.TemporaryDirectory() as d:
            res = run_scenario(sc.with_overrides(out_dir=d))
            fields = {r["t"]: r for r in res.rows}
            walls, worst_wall, worst_mass, worst_mode = [], 0.0, 0.0, 0.0
            for t in sc.times:
                xs, ws = _read_curve(Path(d) / csv_name(sc.name, "analytic", t))
                lo, hi = 1.0 / t ** 2, 4.0 / t ** 2
                worst_wall = max(worst_wall, abs(xs[0] - lo), abs(xs[-1] - hi))
                walls.append((xs[0], xs[-1]))
                worst_mass = max(worst_mass, abs(float(np.trapezoid(ws, xs)) - 1.0),
                                 abs(fields[t]["mass"] - 1.0))
                i = int(np.argmax(ws))
                cell = max(xs[min(i + 1, xs.size - 1)] - xs[i], xs[i] - xs[max(i - 1, 0)])
                worst_mode = max(worst_mode, abs(xs[i] - 2.2 / t ** 2) / cell)
        approach = all(b[0] < a[0] and b[1] < a[1] for a, b in zip(walls, walls[1:]))
        ok = (res.passed and worst_wall <= 1e-10 and worst_mass <= 1e-6 and worst_mode <= 1.0
              and approach)
        return ok, (f"supports {'; '.join(f'[{a:.4f}, {b:.4f}]' for a, b in walls)}; "
                    f"wall err {worst_wall:.1e}; mass err {worst_mass:.1e}; "
                    f"mode offset {worst_mode:.2f} cells; walls approach origin {approach}")
    return _timed(2, "fig2 moving supports, mass and mode", 1.0, body)


def criterion_3() -> CriterionResult:
    def body():
        rng = np.random.default_rng(SEED)
        worst = {"gamma": [0.0, 0.0], "beta": [0.0, 0.0]}
        for _ in range(100):
            for fam, make in (("gamma", random_gamma_params), ("beta", random_beta_params)):
                p = make(rng)
                fi, ode = residuals(p, interior_points(p, rng))
                worst[fam][0] = max(worst[fam][0], fi)
                worst[fam][1] = max(worst[fam][1], ode)
        top = max(max(v) for v in worst.values())
        return top < 1e-8, ("max relative residual (first integral, ODE): "
                            + "; ".join(f"{k} {v[0]:.1e}, {v[1]:.1e}" for k, v in worst.items()))
    return _timed(3, "zero-flux and reduced-ODE residuals", 5.0, body)


def profile_mismatch(p) -> float:
    sol = solve_profile(p.similarity_problem())
    prob = p.similarity_problem()
    lo, hi = prob.lo, prob.hi
    if not math.isfinite(hi):
        hi = (p.shape + 40.0 * math.sqrt(p.shape)) / p.rate
    z = np.linspace(lo, hi, 402)[1:-1]
    ref = p.profile(z)
    keep = ref > 1e-12 * ref.max()
    return float(np.max(np.abs(sol.y(z[keep]) - ref[keep]) / ref[keep]))


def criterion_4() -> CriterionResult:
    def body():
        rng = np.random.default_rng(SEED + 1)
        sets = [FIG1, FIG2] + [random_gamma_params(rng) for _ in range(20)] \
            + [random_beta_params(rng) for _ in range(20)]
        worst = max(profile_mismatch(p) for p in sets)
        return worst <= 1e-6, f"{len(sets)} parameter sets; max relative deviation {worst:.1e}"
    return _timed(4, "quadrature profile vs closed forms", 10.0, body)


def criterion_5() -> CriterionResult:
    def body():
        g = family_spec(FIG1, 0.5, 1.4)
        cfg = FdConfig(n_cells=512, t_start=0.5, t_end=1.4, cluster_scale=1.0)
        study = convergence_study(g, cfg, [64, 128, 256, 512])
        order = fitted_order(study)
        errs = [e for _, e in study]
        monotone = all(b < a for a, b in zip(errs, errs[1:]))
        b = family_spec(FIG2, 1.0, 1.4, frame="similarity_mapped")
        run = evolve(b, FdConfig(n_cells=512, t_start=1.0, t_end=1.4, frame="similarity_mapped"))
        eb = l1_error(run.final, FIG2.density)
        ok = errs[-1] <= 1e-3 and eb <= 1e-3 and order >= 1.8 and monotone
        return ok, (f"gamma L1 {errs[-1]:.2e}, beta L1 {eb:.2e} (n=512); "
                    f"order {order:.3f} from L1 {', '.join(f'{e:.2e}' for e in errs)}")
    return _timed(5, "finite-difference cross-validation", 60.0, body)


def criterion_6() -> CriterionResult:
    def body():
        out = {}
        for name, p, t0 in (("gamma", FIG1, 0.5), ("beta", FIG2, 1.0)):
            spec = family_spec(p, t0, 1.4, truncate=False)
            d = [l1_distance(simulate(spec, McConfig(n_paths=100_000, dt=1e-3, seed=s, t_start=t0,
                                                     bins=64), 1.4), p.density)
                 for s in range(5)]
            out[name] = d
        ok = all(sum(v <= 0.05 for v in d) >= 4 for d in out.values())
        return ok, "; ".join(f"{k} L1 {', '.join(f'{v:.4f}' for v in d)}" for k, d in out.items())
    return _timed(6, "Monte Carlo cross-validation", 120.0, body)


def self_similarity_deviation(p, n: int = 64) -> float:
    prob = p.similarity_problem()
    if isinstance(p, GammaFamilyParams):
        z = np.linspace(0.0, (p.shape + 20.0 * math.sqrt(p.shape)) / p.rate, n)
    else:
        z = np.linspace(prob.lo, prob.hi, n)
    vals = [t ** p.alpha * p.density(z * t ** p.alpha, t) for t in (0.5, 1.0, 2.0)]
    scale = np.max(np.abs(vals[1]))
    return max(float(np.max(np.abs(a - b))) / scale for a in vals for b in vals)


def scaling_covariance_deviation(rng: np.random.Generator, n: int = 1000) -> float:
    worst = 0.0
    for _ in range(n):
        idx = ScalingIndices.from_alpha(rng.uniform(-3, 3) or 1.0, b=rng.uniform(0.2, 3.0))
        p = GammaFamilyParams(mu1=rng.uniform(-3, 3), mu2=rng.uniform(0.1, 2),
                              mu3=rng.uniform(0.1, 2), alpha=idx.alpha)
        prob = SimilarityProblem(p.rho1, p.rho2, idx.alpha, 0.0)
        x, t, eps = rng.uniform(0.01, 5.0), rng.uniform(0.1, 5.0), rng.uniform(0.2, 5.0)
        xs, ts = eps ** idx.a * x, eps ** idx.b * t
        d1, d2 = coefficients_at(prob, x, t)
        e1, e2 = coefficients_at(prob, xs, ts)
        z, zs = similarity_variable(x, t, idx.alpha), similarity_variable(xs, ts, idx.alpha)
        y = p.profile(z) if p.rate > 0 else 1.0
        w, ws = density_from_profile(y, t, idx.alpha), density_from_profile(y, ts, idx.alpha)
        devs = [abs(e1 - eps ** idx.d * d1) / max(abs(e1), 1e-300),
                abs(e2 - eps ** idx.e * d2) / abs(e2),
                abs(zs - z) / abs(z),
                abs(ws - eps ** (-idx.a) * w) / max(abs(ws), 1e-300)]
        worst = max(worst, *devs)
    return worst


def criterion_7() -> CriterionResult:
    def body():
        dev = max(self_similarity_deviation(FIG1), self_similarity_deviation(FIG2))
        cov = scaling_covariance_deviation(np.random.default_rng(SEED + 2))
        return dev <= 1e-10 and cov <= 1e-10, (f"self-similarity deviation {dev:.1e}; "
                                               f"scale covariance deviation {cov:.1e} over 1000 draws")
    return _timed(7, "self-similarity and scale covariance", 5.0, body)


def criterion_8() -> CriterionResult:
    def body():
        x = np.linspace(0.5, 50.0, 2001)
        rec = float(np.max(np.abs(np.expm1(log_gamma(x + 1.0) - log_gamma(x) - np.log(x)))))
        oracle = quad(lambda u: u ** (1.0 / 3.0) * (1.0 - u) ** 0.5, 0.0, 1.0,
                      epsabs=1e-14, epsrel=1e-14).value
        b = beta_fn(4.0 / 3.0, 1.5)
        rel = abs(b - oracle) / oracle
        return rec <= 1e-12 and rel <= 1e-10, (f"recurrence rel err {rec:.1e}; "
                                               f"B(4/3, 3/2) = {b:.15g} vs {oracle:.15g} ({rel:.1e})")
    return _timed(8, "log-gamma recurrence and Beta function", 1.0, body)


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
            5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8}


def run_all(numbers=None, report=None) -> list[CriterionResult]:
    out = []
    for n in sorted(numbers or CRITERIA):
        r = CRITERIA[n]()
        if report is not None:
            report(r.line())
        out.append(r)
    return out
