from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from choquard.asymptotics import (denominator, fit_rate, identity_checks, predict_rates, rho0,
                                  scaling_schedule, smoothstep_cutoff)
from choquard.asymptotics import testfunction_expansion as expansion
from choquard.closed_forms import conformal_potential_constant, extremal_amplitude, talenti_amplitude
from choquard.problem import InadmissibleError, PowerTerm, ProblemParams
from choquard.radial import build_grid, sphere_area
from conftest import DEFAULTS, reference


@pytest.mark.parametrize("N, alpha, q2, sigma", [(5, 1.0, 1.8, 0.6 / 3.4), (3, 0.5, 2.6, 0.9 / 3.1)])
def test_sigma_examples(N, alpha, q2, sigma):
    s = scaling_schedule(ProblemParams(N, alpha, (PowerTerm(q2, 1.0),)), 10.0)
    assert s.sigma == pytest.approx(sigma, rel=1e-12)
    assert s.delta == pytest.approx(10.0 ** -sigma, rel=1e-12)


@pytest.mark.parametrize("N", [3, 4, 5])
def test_relation_A(N):
    s = scaling_schedule(DEFAULTS[N], 1e3)
    assert s.relation_error < 1e-12
    assert s.delta == pytest.approx(s.q2 and s.eps2**s.q2 / s.eps1, rel=1e-12)
    assert s.g_coefficient(s.q2) == pytest.approx(s.delta, rel=1e-12)


def test_schedule_rejects_bad_eps():
    with pytest.raises(ValueError):
        scaling_schedule(DEFAULTS[5], 0.0)


def test_predict_n5():
    pred = predict_rates(DEFAULTS[5])
    assert pred["xi_total"].exponent == pytest.approx(-2 / 3.4, rel=1e-12)
    assert pred["u0"].exponent == pytest.approx(3 / 3.4, rel=1e-12)
    assert pred["gap"].exponent == pytest.approx(-0.6 / 3.4, rel=1e-12)
    assert pred["mass_u"].exponent == pytest.approx(-4 / 3.4, rel=1e-12)
    assert pred["gap"].model == "power"


def test_predict_n4_log_base():
    pred = predict_rates(DEFAULTS[4])
    assert pred["gap"].model == "log-corrected"
    assert pred["gap"].exponent == pytest.approx(-(5 - 4.4) / (4.4 - 1), rel=1e-12)
    assert pred["xi_total"].exponent == pytest.approx(-2 / 3.4, rel=1e-12)
    assert pred["mass_wtilde"].model == "log" and pred["mass_wtilde"].exponent == 1


def test_predict_n3_stage_decomposition():
    pred = predict_rates(DEFAULTS[3])
    sigma = 0.9 / 3.1
    stage = -(3.5 - 2.6) / ((2.6 - 1.5) * (2.6 + 0.5))
    assert pred["xi_stage"].exponent == pytest.approx(stage, rel=1e-12)
    assert pred["xi_total"].exponent == pytest.approx(-1 / 1.1, rel=1e-12)
    assert -(1 + sigma) / 2 + stage == pytest.approx(-1 / 1.1, rel=1e-12)
    assert pred["gap"].exponent == pytest.approx(-0.9 / 2.2, rel=1e-12)
    assert pred["mass_wtilde"].exponent == pytest.approx(0.9 / 2.2, rel=1e-12)


def test_predict_inadmissible():
    with pytest.raises(InadmissibleError):
        predict_rates(ProblemParams(4, 1.0, (PowerTerm(1.9, 1.0),)))


@pytest.mark.parametrize("N, alpha, q2", [(3, Fraction(1, 2), Fraction(13, 5)),
                                          (4, Fraction(1), Fraction(11, 5)),
                                          (5, Fraction(1), Fraction(9, 5)),
                                          (7, Fraction(3, 2), Fraction(3, 2))])
def test_identities_exact(N, alpha, q2):
    checks = identity_checks(N, alpha, q2)
    assert all(checks.values()), checks
    assert ("mass_chain" in checks) == (N == 3)


def test_identities_detect_perturbation():
    # a sign flip in sigma must break relation A
    N, a, q2 = 5, Fraction(1), Fraction(9, 5)
    from choquard import asymptotics as asy
    s = asy.sigma_exponent(N, a, q2)
    assert -s + 1 != -asy.eps1_exponent(N, a, q2) + q2 * asy.eps2_exponent(N, a, q2)


# ---------------------------------------------------------------- rho0

def _rho0_quad(N, alpha, q2, b):
    """Both integrals by adaptive quadrature; I_alpha * W_1^p is closed form."""
    p = (N + alpha) / (N - 2)
    A = extremal_amplitude(N, alpha) * talenti_amplitude(N)
    W = lambda r: A * (1 + r * r) ** (-(N - 2) / 2)
    pot = lambda r: A**p * conformal_potential_constant(N, alpha) * (1 + r * r) ** (-(N - alpha) / 2)
    S = sphere_area(N)
    mass = S * quad(lambda r: W(r) ** 2 * r ** (N - 1), 0, np.inf, limit=200)[0]
    cross = S * quad(lambda r: pot(r) * W(r) ** q2 * r ** (N - 1), 0, np.inf, limit=200)[0]
    return (b * ((N + alpha) - (N - 2) * q2) / 2 * cross / mass) ** (2 / denominator(N, alpha, q2))


def test_rho0_oracle():
    g, k = reference(5, 1.0)
    assert rho0(DEFAULTS[5], g, k) == pytest.approx(_rho0_quad(5, 1.0, 1.8, 1.0), rel=5e-3)


def test_rho0_homogeneity_in_b():
    g, k = reference(5, 1.0)
    r1 = rho0(ProblemParams(5, 1.0, (PowerTerm(1.8, 1.0),)), g, k)
    r2 = rho0(ProblemParams(5, 1.0, (PowerTerm(1.8, 2.0),)), g, k)
    assert r2 / r1 == pytest.approx(2 ** (2 / denominator(5, 1.0, 1.8)), rel=1e-12)


@pytest.mark.parametrize("N", [3, 4])
def test_rho0_low_dimension(N):
    g, k = reference(N, DEFAULTS[N].alpha)
    with pytest.raises(ValueError):
        rho0(DEFAULTS[N], g, k)


# ---------------------------------------------------------------- fitting

def test_fit_exact_power():
    eps = np.logspace(2, 5, 9)
    f = fit_rate(list(zip(eps, 3 * eps**-0.5)))
    assert f.exponent == pytest.approx(-0.5, abs=1e-12)
    assert f.prefactor == pytest.approx(3.0, rel=1e-10)
    assert f.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_exact_log_corrected():
    eps = np.logspace(2, 5, 9)
    f = fit_rate(list(zip(eps, 1 / (eps * np.log(eps)))), "log-corrected")
    assert f.exponent == pytest.approx(-1.0, abs=1e-12)


def test_fit_log_model():
    eps = np.logspace(2, 8, 9)
    assert fit_rate(list(zip(eps, np.log(eps) ** 1.0)), "log").exponent == pytest.approx(1.0, abs=1e-12)


def test_fit_noise_monte_carlo():
    rng = np.random.default_rng(12345)
    eps = np.logspace(1, 4, 13)
    slopes = [fit_rate(list(zip(eps, eps**-0.3 * (1 + 0.05 * rng.uniform(-1, 1, eps.size))))).exponent
              for _ in range(200)]
    assert np.max(np.abs(np.array(slopes) + 0.3)) <= 0.03


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 1e6), st.floats(-2.0, 2.0))
def test_fit_rescale_invariance(c, e):
    eps = np.logspace(2, 4, 7)
    y = eps**e * (1 + 0.1 * np.sin(eps))
    a = fit_rate(list(zip(eps, y)))
    b = fit_rate(list(zip(eps, c * y)))
    assert b.exponent == pytest.approx(a.exponent, abs=1e-12)
    assert b.prefactor == pytest.approx(c * a.prefactor, rel=1e-9)


def test_fit_order_invariance():
    eps = np.logspace(2, 4, 7)
    pts = list(zip(eps, eps**0.7 * (1 + 0.01 * np.cos(eps))))
    assert fit_rate(pts[::-1]).exponent == fit_rate(pts).exponent


@pytest.mark.parametrize("samples, model", [
    ([(10.0, 1.0), (100.0, 2.0), (1000.0, 3.0)], "power"),
    ([(1.0, 1.0), (2.0, 1.0), (3.0, 1.0), (4.0, 1.0)], "power"),
    ([(10.0, 1.0), (100.0, -2.0), (1000.0, 3.0), (1e4, 1.0)], "power"),
    ([(0.1, 1.0), (10.0, 1.0), (100.0, 1.0), (1e3, 1.0)], "log-corrected"),
    ([(10.0, 1.0), (100.0, 2.0), (1000.0, 3.0), (1e4, 1.0)], "cubic"),
])
def test_fit_errors(samples, model):
    with pytest.raises(ValueError):
        fit_rate(samples, model)


# ---------------------------------------------------------------- cutoffs and expansions

@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 100.0))
def test_smoothstep_bounds(R):
    r = np.linspace(0, 3 * R, 30001)
    eta = smoothstep_cutoff(r, R)
    assert np.all(eta[r <= R] == 1) and np.all(eta[r >= 2 * R] == 0)
    assert np.all((eta >= 0) & (eta <= 1)) and np.all(np.diff(eta) <= 0)
    assert np.max(np.abs(np.gradient(eta, r))) <= 2 / R


@pytest.mark.parametrize("N", [3, 4, 5])
def test_u_kappa_gradient_defect(N):
    g = build_grid(N, 200.0, 1024, "loglinear", core=1e-3)
    from choquard.riesz import build_kernel
    k = build_kernel(g, 1.0)
    table = expansion(g, k, "u_kappa", np.logspace(-2.5, -0.5, 9))
    assert table.fits["grad_defect"] == pytest.approx(N - 2, rel=0.15)
    assert np.all(table.columns["dpp"] > 0)


def test_expansion_scale_range():
    g, k = reference(5, 1.0)
    with pytest.raises(ValueError):
        expansion(g, k, "u_kappa", [1e-6, 0.1])
    with pytest.raises(ValueError):
        expansion(g, k, "eta_l_W1", [2.0, 10.0])
    with pytest.raises(ValueError):
        expansion(g, k, "nothing", [0.1, 0.2])
