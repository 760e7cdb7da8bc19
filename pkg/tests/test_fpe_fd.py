import math

import numpy as np
import pytest

import fpe_sim.fpe_fd as fd
from fpe_sim.errors import ConfigError, InstabilityError
from fpe_sim.field import DensityField
from fpe_sim.fpe_fd import (
    FdConfig,
    FixedDomain,
    FpeProblemSpec,
    MovingDomain,
    convergence_study,
    discrete_steady_state,
    evolve,
    family_spec,
    fitted_order,
    l1_error,
    probability_current,
    to_similarity_frame,
)
from fpe_sim.solutions import BetaFamilyParams, GammaFamilyParams

FIG1 = GammaFamilyParams(mu1=-3.0, mu2=0.5, mu3=0.5, alpha=-2.0)
FIG2 = BetaFamilyParams(z1=1.0, z2=4.0, a1=1 / 3, a2=0.5, alpha=-2.0)


def test_probability_current_examples():
    assert probability_current(0.0, 0.0, 1.3, 0.7, 0.2) == 0.0
    # Fick's law: zero drift, constant diffusion, linear W
    assert probability_current(0.4, 2.0, 0.0, 0.3, 0.0) == pytest.approx(-0.6)


def test_gamma_current_similarity_vs_physical():
    p = FIG1
    x = np.linspace(0.05, 2.0, 40)
    t = 1.3
    w = p.density(x, t)
    lam = float(p.rate_at(t))
    dw = -lam * w  # kappa = 1: W = lam exp(-lam x)
    d1, d2 = p.drift(x, t), p.diffusion(x, t)
    dd2 = p.mu3 * t ** (p.alpha - 1.0) * np.ones_like(x)
    s_phys = probability_current(w, dw, d1, d2, dd2)
    # the physical current is not zero: dW/dt = -(alpha/t) d(xW)/dx, so the
    # profile's contraction is carried by S = alpha x W / t
    np.testing.assert_allclose(s_phys, p.alpha * x * w / t, rtol=1e-12)
    # in the similarity frame the current vanishes identically
    z = x / t ** p.alpha
    y, yp, _ = p.profile_derivatives(z)
    s_sim = probability_current(y, yp, p.rho1(z) - p.alpha * z, p.rho2(z), p.mu3)
    assert np.max(np.abs(s_sim)) < 1e-13


def test_config_validation():
    for kw in ({"n_cells": 8}, {"t_start": 0.0}, {"t_end": 0.1}, {"cfl_safety": 0.0},
               {"scheme": "rk4"}, {"frame": "lagrangian"}, {"cluster_scale": -1.0},
               {"snapshot_times": (5.0,)}):
        base = dict(n_cells=32, t_start=0.5, t_end=1.0)
        base.update(kw)
        with pytest.raises(ConfigError):
            FdConfig(**base)


def test_frame_domain_mismatch():
    fixed = FpeProblemSpec(lambda x, t: 0 * x, lambda x, t: 1 + 0 * x, FixedDomain(0, 1),
                           lambda x: np.ones_like(x))
    with pytest.raises(ConfigError):
        to_similarity_frame(fixed, 1.0)
    with pytest.raises(ConfigError):
        evolve(fixed, FdConfig(32, 1.0, 1.1, frame="similarity_mapped"))
    moving = family_spec(FIG2, 1.0, 1.1, frame="similarity_mapped")
    with pytest.raises(ConfigError):
        evolve(moving, FdConfig(32, 1.0, 1.1, frame="physical_fixed"))


def test_negative_diffusion_rejected():
    spec = FpeProblemSpec(lambda x, t: 0 * x, lambda x, t: -1 + 0 * x, FixedDomain(0, 1),
                          lambda x: np.ones_like(x))
    with pytest.raises(ConfigError):
        evolve(spec, FdConfig(32, 1.0, 1.1))


@pytest.mark.parametrize("scheme", ["crank_nicolson", "explicit_upwind"])
def test_pure_diffusion_keeps_uniform(scheme):
    spec = FpeProblemSpec(lambda x, t: 0 * x, lambda x, t: 0.3 + 0 * x, FixedDomain(0, 1),
                          lambda x: np.ones_like(x))
    run = evolve(spec, FdConfig(64, 1.0, 2.0, scheme=scheme))
    np.testing.assert_allclose(run.final.ws, 1.0, atol=1e-13)
    assert run.max_mass_drift < 1e-13


def test_conservation_and_positivity_gamma():
    spec = family_spec(FIG1, 0.5, 1.4)
    cfg = FdConfig(128, 0.5, 1.4, cluster_scale=1.0, snapshot_times=(0.8, 1.1))
    run = evolve(spec, cfg)
    assert run.max_mass_drift < 1e-8 * (1.4 - 0.5)
    assert run.min_value >= -1e-12
    assert [round(s.t, 12) for s in run.snapshots] == [0.8, 1.1]
    for s in run.snapshots + [run.final]:
        assert s.mass() == pytest.approx(1.0, abs=1e-8)


def test_explicit_scheme_positive_and_first_order():
    spec = family_spec(FIG1, 0.5, 1.4)
    errs = []
    for n in (128, 256):
        run = evolve(spec, FdConfig(n, 0.5, 1.4, scheme="explicit_upwind", cluster_scale=1.0))
        assert run.min_value >= -1e-12
        errs.append(l1_error(run.final, FIG1.density))
    assert errs[0] < 0.1
    assert 1.7 < errs[0] / errs[1] < 2.3


def test_similarity_frame_coefficients_are_profiles():
    spec = family_spec(FIG2, 1.0, 1.4, frame="similarity_mapped")
    prob = to_similarity_frame(spec, 1.0)
    z = np.linspace(1.1, 3.9, 13)
    for s in (0.0, 0.2, math.log(1.4)):
        np.testing.assert_allclose(prob.drift(z, s), FIG2.rho1(z) - FIG2.alpha * z, rtol=1e-12)
        np.testing.assert_allclose(prob.diffusion(z, s), FIG2.rho2(z), rtol=1e-12)
    assert (prob.q_lo, prob.q_hi) == (1.0, 4.0)


def test_similarity_frame_alpha_zero_is_log_time():
    spec = FpeProblemSpec(lambda x, t: 0.5 * x / t, lambda x, t: 1.0 + 0 * x, MovingDomain(-1, 2, 0.0),
                          lambda x: np.ones_like(x) / 3)
    prob = to_similarity_frame(spec, 1.0)
    z = np.linspace(-1, 2, 5)
    s = 0.7
    t = math.exp(s)
    np.testing.assert_allclose(prob.drift(z, s), t * spec.D1(z, t))
    np.testing.assert_allclose(prob.diffusion(z, s), t * spec.D2(z, t))
    np.testing.assert_allclose(prob.initial(z), spec.initial(z))


def test_stationarity_oracle_gamma_similarity_frame():
    # kappa = 1 and a uniform z grid: the Chang-Cooper zero-current state is
    # exactly exp(-rate z), so the analytic profile is a discrete fixed point
    spec = family_spec(FIG1, 1.0, 2.0, frame="similarity_mapped")
    t1 = math.exp(1e-4)
    run = evolve(spec, FdConfig(256, 1.0, t1, frame="similarity_mapped"))
    init = evolve(spec, FdConfig(256, 1.0, 2.0, frame="similarity_mapped", snapshot_times=(1.0,))).snapshots[0]
    v0 = init.ws * init.t ** FIG1.alpha
    v1 = run.final.ws * run.final.t ** FIG1.alpha
    assert run.steps >= 1
    assert np.max(np.abs(v1 - v0)) <= 1e-10


def test_discrete_steady_state_beta():
    spec = family_spec(FIG2, 1.0, 1.4, frame="similarity_mapped")
    cfg = FdConfig(512, 1.0, 1.4, frame="similarity_mapped")
    ss = discrete_steady_state(spec, cfg, 1.0)
    assert ss.mass() == pytest.approx(1.0, rel=1e-13)
    assert l1_error(ss, FIG2.density) < 1e-3
    # the discrete steady state is a fixed point of the time stepper
    moved = evolve(FpeProblemSpec(spec.D1, spec.D2, spec.domain, ss, self_similar=True),
                   FdConfig(512, 1.0, 1.0001, frame="similarity_mapped")).final
    np.testing.assert_allclose(moved.ws * moved.t ** FIG2.alpha, ss.ws, atol=1e-10)


def test_frame_equivalence_gamma():
    phys = evolve(family_spec(FIG1, 0.5, 1.4), FdConfig(256, 0.5, 1.4, cluster_scale=1.0)).final
    sim = evolve(family_spec(FIG1, 0.5, 1.4, frame="similarity_mapped"),
                 FdConfig(256, 0.5, 1.4, frame="similarity_mapped", cluster_scale=1.0)).final
    e_phys, e_sim = l1_error(phys, FIG1.density), l1_error(sim, FIG1.density)
    other = np.interp(phys.xs, sim.xs, sim.ws, right=0.0)
    gap = float(np.sum(np.abs(phys.ws - other) * phys.cell_weights()))
    assert gap <= 2 * max(e_phys, e_sim) + 1e-6


def test_convergence_study_gamma_small():
    spec = family_spec(FIG1, 0.5, 1.4)
    study = convergence_study(spec, FdConfig(64, 0.5, 1.4, cluster_scale=1.0), [64, 128, 256])
    errs = [e for _, e in study]
    assert errs[0] > errs[1] > errs[2]
    assert fitted_order(study) >= 1.8
    assert 3.5 < errs[1] / errs[2] < 4.5


def test_convergence_needs_reference():
    spec = FpeProblemSpec(lambda x, t: 0 * x, lambda x, t: 1 + 0 * x, FixedDomain(0, 1),
                          lambda x: np.ones_like(x))
    with pytest.raises(ConfigError):
        convergence_study(spec, FdConfig(32, 1.0, 1.1), [32, 64])


def test_blowup_detection(monkeypatch):
    # strong drift into the lower wall concentrates the density; with a tiny
    # blow-up threshold that growth must trip the detector
    monkeypatch.setattr(fd, "BLOWUP_FACTOR", 2.0)
    spec = FpeProblemSpec(lambda x, t: -5 + 0 * x, lambda x, t: 0.01 + 0 * x, FixedDomain(0, 1),
                          lambda x: np.ones_like(x))
    with pytest.raises(InstabilityError):
        evolve(spec, FdConfig(64, 1.0, 2.0))


def test_density_field_initial_is_interpolated():
    xs = np.linspace(0, 1, 11)
    init = DensityField(1.0, xs, np.ones_like(xs), 0.0, 1.0)
    spec = FpeProblemSpec(lambda x, t: 0 * x, lambda x, t: 0.1 + 0 * x, FixedDomain(0, 1), init)
    run = evolve(spec, FdConfig(32, 1.0, 1.5))
    np.testing.assert_allclose(run.final.ws, 1.0, atol=1e-12)
