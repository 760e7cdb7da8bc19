import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special as sps, stats

from fpe_sim.acceptance import interior_points, random_beta_params, random_gamma_params, residuals
from fpe_sim.errors import DomainError, NonNormalizableError, ParameterError, SingularityError
from fpe_sim.scaling import SimilarityProblem
from fpe_sim.solutions import (
    BetaFamilyParams,
    GammaFamilyParams,
    analytic_field,
    beta_family_density,
    beta_normalization_constant,
    boundary_positions,
    f_from_profiles,
    first_integral_residual,
    gamma_family_density,
    gamma_family_peak,
    gamma_tail_cutoff,
    reduced_ode_residual,
    solve_profile,
)

FIG1 = GammaFamilyParams(mu1=-3.0, mu2=0.5, mu3=0.5, alpha=-2.0)
FIG2 = BetaFamilyParams(z1=1.0, z2=4.0, a1=1 / 3, a2=0.5, alpha=-2.0)


def gamma_oracle(p, x, t):
    lam = (p.alpha - p.mu1) / (p.mu3 * t ** p.alpha)
    return stats.gamma.pdf(x, a=p.mu2 / p.mu3, scale=1.0 / lam)


def beta_oracle(p, x, t):
    s = t ** p.alpha
    return stats.beta.pdf(x, p.a1 + 1, p.a2 + 1, loc=p.z1 * s, scale=(p.z2 - p.z1) * s)


# --- f(z) and residuals -----------------------------------------------------

def test_f_gamma_by_hand():
    p = GammaFamilyParams(mu1=0.3, mu2=2.0, mu3=0.7, alpha=1.5)
    z = np.array([0.2, 1.0, 3.0])
    want = ((p.mu1 - p.alpha) * z + p.mu2 - p.mu3) / (p.mu3 * z)
    np.testing.assert_allclose(f_from_profiles(p.similarity_problem(), z), want, rtol=1e-14)


def test_f_beta_vanishes_at_mode():
    prob = FIG2.similarity_problem()
    assert FIG2.mode == pytest.approx(2.2)
    assert f_from_profiles(prob, 2.2) == pytest.approx(0.0, abs=1e-14)
    z = np.array([1.5, 3.0])
    want = FIG2.a1 / (z - 1) - FIG2.a2 / (4 - z)
    np.testing.assert_allclose(f_from_profiles(prob, z), want, rtol=1e-13)


def test_f_zero_when_numerator_vanishes():
    prob = SimilarityProblem(lambda z: 0.5 * z + 2 * z, lambda z: z * z + 1, 0.5,
                             rho2_prime=lambda z: 2 * z)
    assert np.all(np.abs(f_from_profiles(prob, np.linspace(-3, 3, 11))) < 1e-15)


def test_f_singular():
    with pytest.raises(SingularityError):
        f_from_profiles(FIG1.similarity_problem(), 0.0)


def test_residuals_vanish_on_zero_function():
    prob = FIG1.similarity_problem()
    assert reduced_ode_residual(prob, 0.0, 0.0, 0.0, 1.3) == 0.0
    assert first_integral_residual(prob, 0.0, 0.0, 1.3) == 0.0


@settings(max_examples=100)
@given(st.integers(0, 2 ** 32 - 1))
def test_family_residuals_random(seed):
    rng = np.random.default_rng(seed)
    for p in (random_gamma_params(rng), random_beta_params(rng)):
        fi, ode = residuals(p, interior_points(p, rng))
        assert fi < 1e-9 and ode < 1e-8


def test_profile_derivatives_against_finite_differences():
    for p in (FIG1, FIG2, GammaFamilyParams(0.2, 3.0, 1.0, 1.0)):
        z = np.linspace(1.2, 3.5, 7)
        y, yp, ypp = p.profile_derivatives(z)
        h = 1e-5
        np.testing.assert_allclose(yp, (p.profile(z + h) - p.profile(z - h)) / (2 * h), rtol=1e-7)
        np.testing.assert_allclose(
            ypp, (p.profile(z + 1e-3) - 2 * y + p.profile(z - 1e-3)) / 1e-6, rtol=1e-5)


# --- quadrature solution ----------------------------------------------------

def test_solve_profile_gamma_figure():
    sol = solve_profile(FIG1.similarity_problem())
    z = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(sol.y(z), gamma_oracle(FIG1, z, 1.0), rtol=1e-6)
    assert sol.integration_constant == 0.0
    assert sol.domain == (0.0, math.inf)


def test_solve_profile_beta_normalised():
    sol = solve_profile(FIG2.similarity_problem())
    total, _ = integrate.quad(lambda z: float(sol.y(z)), 1.0, 4.0, epsabs=1e-12, limit=200)
    assert total == pytest.approx(1.0, abs=1e-8)
    assert sol.y(1.0) == 0.0 and sol.y(4.0) == 0.0
    z = np.linspace(1.01, 3.99, 50)
    np.testing.assert_allclose(sol.y(z), beta_oracle(FIG2, z, 1.0), rtol=1e-6)


def test_solve_profile_custom_anchor_same_result():
    prob = FIG2.similarity_problem()
    a = solve_profile(prob)
    b = solve_profile(prob, anchor=3.1)
    z = np.linspace(1.1, 3.9, 9)
    np.testing.assert_allclose(a.y(z), b.y(z), rtol=1e-9)
    with pytest.raises(DomainError):
        solve_profile(prob, anchor=5.0)


def test_solve_profile_integrable_but_unbounded_gamma():
    p = GammaFamilyParams(mu1=-1.0, mu2=0.25, mu3=0.5, alpha=0.5)
    sol = solve_profile(p.similarity_problem())
    z = np.array([0.05, 0.5, 2.0])
    np.testing.assert_allclose(sol.y(z), gamma_oracle(p, z, 1.0), rtol=1e-6)
    assert p.diagnostics() and "integrable" in p.diagnostics()[0]
    with pytest.raises(ParameterError):
        p.validate()


@pytest.mark.parametrize("mu2", [0.0, -0.3])
def test_solve_profile_non_normalizable(mu2):
    p = GammaFamilyParams(mu1=-1.0, mu2=mu2, mu3=0.5, alpha=0.5)
    with pytest.raises(NonNormalizableError):
        solve_profile(p.similarity_problem())


def test_solve_profile_growing_tail_non_normalizable():
    # (alpha - mu1)/mu3 < 0: the profile grows exponentially
    p = GammaFamilyParams(mu1=2.0, mu2=1.0, mu3=1.0, alpha=1.0)
    with pytest.raises(NonNormalizableError):
        solve_profile(p.similarity_problem())


def test_solve_profile_whole_line_gaussian():
    # rho1 = 0, rho2 = 1, alpha = 1/2: the heat-kernel profile
    prob = SimilarityProblem(lambda z: 0 * np.asarray(z), lambda z: np.ones_like(np.asarray(z, float)),
                             0.5, rho2_prime=lambda z: 0 * np.asarray(z))
    sol = solve_profile(prob)
    z = np.array([-2.0, 0.0, 1.0])
    np.testing.assert_allclose(sol.y(z), stats.norm.pdf(z, scale=math.sqrt(2.0)), rtol=1e-8)


# --- gamma family -------------------------------------------------------------

def test_gamma_density_examples():
    assert gamma_family_density(FIG1, 0.0, 0.5) == pytest.approx(0.5, rel=1e-14)
    assert gamma_family_density(FIG1, 0.0, 1.0) == pytest.approx(2.0, rel=1e-14)
    p = GammaFamilyParams(mu1=-1.0, mu2=1.5, mu3=0.5, alpha=1.0)
    assert gamma_family_density(p, 0.0, 1.0) == 0.0


@given(st.floats(0.0, 10.0), st.floats(0.2, 3.0))
def test_gamma_density_matches_scipy(x, t):
    p = GammaFamilyParams(mu1=-1.0, mu2=1.7, mu3=0.5, alpha=-0.7)
    assert gamma_family_density(p, x, t) == pytest.approx(gamma_oracle(p, x, t), rel=1e-11, abs=1e-300)


def test_gamma_density_errors():
    with pytest.raises(DomainError):
        gamma_family_density(FIG1, -0.1, 1.0)
    with pytest.raises(DomainError):
        gamma_family_density(FIG1, 0.1, 0.0)
    with pytest.raises(ParameterError):
        gamma_family_density(GammaFamilyParams(1.0, 1.0, 1.0, 0.5), 0.1, 1.0)
    with pytest.raises(ParameterError):
        GammaFamilyParams(1.0, 1.0, 0.0, 0.5).validate()


def test_gamma_peak():
    assert gamma_family_peak(FIG1, 1.4) == pytest.approx((0.0, 3.92), rel=1e-14)
    assert gamma_family_peak(FIG1, 1.0) == pytest.approx((0.0, abs(FIG1.mu1 - FIG1.alpha) / FIG1.mu3))
    grow = [gamma_family_peak(FIG1, t)[1] for t in (0.5, 0.8, 1.1, 1.4)]
    assert all(b > a for a, b in zip(grow, grow[1:]))
    pos = GammaFamilyParams(mu1=-1.0, mu2=0.5, mu3=0.5, alpha=1.0)
    shrink = [gamma_family_peak(pos, t)[1] for t in (0.5, 0.8, 1.1, 1.4)]
    assert all(b < a for a, b in zip(shrink, shrink[1:]))
    with pytest.raises(ParameterError):
        gamma_family_peak(GammaFamilyParams(-3, 1.0, 0.5, -2), 1.0)


def test_gamma_argmax_at_origin():
    x = np.linspace(0, 5, 20001)
    for t in (0.5, 0.8, 1.1, 1.4):
        assert np.argmax(gamma_family_density(FIG1, x, t)) == 0


def test_gamma_tail_cutoff():
    p = GammaFamilyParams(mu1=-1.0, mu2=2.0, mu3=0.5, alpha=0.5)
    x = gamma_tail_cutoff(p, 2.0, 1e-10)
    assert stats.gamma.sf(x, a=4.0, scale=1.0 / float(p.rate_at(2.0))) == pytest.approx(1e-10, rel=1e-6)


# --- beta family --------------------------------------------------------------

def test_beta_normalization_constant():
    assert beta_normalization_constant(BetaFamilyParams(0, 1, 1, 1, 1.0)) == pytest.approx(6.0, rel=1e-13)
    b, _ = integrate.quad(lambda u: 1.0, 0, 1, weight="alg", wvar=(1 / 3, 1 / 2))
    assert beta_normalization_constant(FIG2) == pytest.approx(1 / (3 ** (11 / 6) * b), rel=1e-12)
    for bad in (BetaFamilyParams(2, 1, 1, 1, 1), BetaFamilyParams(0, 1, 0, 1, 1),
                BetaFamilyParams(0, 1, 1, -1, 1)):
        with pytest.raises(ParameterError):
            beta_normalization_constant(bad)


def test_beta_density():
    x = np.array([0.1, 0.9, 1.3, 2.0, 2.1, 3.0])
    for t in (1.0, 1.2, 1.4):
        np.testing.assert_allclose(beta_family_density(FIG2, x, t), beta_oracle(FIG2, x, t),
                                   rtol=1e-11, atol=1e-300)
        lo, hi = boundary_positions(FIG2, t)
        assert beta_family_density(FIG2, lo, t) == 0.0 and beta_family_density(FIG2, hi, t) == 0.0
        mass, _ = integrate.quad(lambda v: float(beta_family_density(FIG2, v, t)), lo, hi, limit=200)
        assert mass == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(DomainError):
        beta_family_density(FIG2, 1.0, -1.0)


def test_beta_large_exponents_no_overflow():
    p = BetaFamilyParams(z1=10.0, z2=11.0, a1=400.0, a2=300.0, alpha=1.0)
    x = np.linspace(10.0, 11.0, 11)
    np.testing.assert_allclose(beta_family_density(p, x, 1.0), beta_oracle(p, x, 1.0), rtol=1e-9)


def test_boundary_positions():
    assert boundary_positions(FIG2, 1.0) == (1.0, 4.0)
    lo, hi = boundary_positions(FIG2, 1.4)
    assert lo == pytest.approx(1 / 1.96, rel=1e-14) and hi == pytest.approx(4 / 1.96, rel=1e-14)
    seq = [boundary_positions(FIG2, t) for t in np.linspace(0.5, 3, 12)]
    assert all(abs(b[0]) < abs(a[0]) and abs(b[1]) < abs(a[1]) for a, b in zip(seq, seq[1:]))
    with pytest.raises(DomainError):
        boundary_positions(FIG2, 0.0)


@pytest.mark.parametrize("z1, z2, cls", [(1, 4, "i"), (-4, -1, "i"), (0, 2, "ii"), (-2, 0, "ii"),
                                         (-1, 3, "iii")])
def test_beta_subclasses(z1, z2, cls):
    assert BetaFamilyParams(z1, z2, 1.0, 1.0, -1.0).subclass == cls


# --- cross-family properties --------------------------------------------------

@pytest.mark.parametrize("p", [FIG1, FIG2, GammaFamilyParams(-1, 2.5, 0.5, 0.7),
                               BetaFamilyParams(-1, 2, 2.0, 0.7, 1.3)])
def test_self_similarity(p):
    if isinstance(p, GammaFamilyParams):
        z = np.linspace(0, 20 / p.rate, 64)
    else:
        z = np.linspace(p.z1, p.z2, 64)
    ref = p.density(z, 1.0)
    for t in (0.5, 2.0):
        np.testing.assert_allclose(t ** p.alpha * p.density(z * t ** p.alpha, t), ref,
                                   rtol=1e-10, atol=1e-10 * ref.max())


@pytest.mark.parametrize("p, times", [(FIG1, (0.5, 0.8, 1.1, 1.4)), (FIG2, (1.0, 1.2, 1.4)),
                                      (BetaFamilyParams(-1, 2, 0.2, 3.0, 0.5), (0.5, 2.0))])
def test_analytic_field_mass(p, times):
    for t in times:
        f = analytic_field(p, t)
        assert f.mass() == pytest.approx(1.0, abs=1e-6)
        assert np.all(f.ws >= 0)
        assert f.x_lo <= f.xs[0] and f.xs[-1] <= f.x_hi
