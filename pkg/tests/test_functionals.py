import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from choquard.closed_forms import extremal_W
from choquard.functionals import (action_u, action_v, action_w, energy_breakdown, fibering_curve,
                                  formulation, limit_action, nehari_residual, pohozaev_residual,
                                  project_fibering_dilation, project_fibering_scalar, tau)
from choquard.asymptotics import scaling_schedule
from choquard.problem import PowerTerm, ProblemParams
from choquard.radial import resample
from choquard.solver import rescale
from conftest import DEFAULTS, profile_reference, reference

P5 = DEFAULTS[5]
P3MIX = ProblemParams(3, 0.5, (PowerTerm(2.2, 0.5), PowerTerm(2.6, 1.0)))


def _bump(g, scale=1.0):
    f = np.exp(-((g.r / scale) ** 2))
    f[-1] = 0.0
    return f


@pytest.mark.parametrize("fn", [action_u, action_v, action_w])
def test_zero_field(fn):
    g, k = reference(5, 1.0)
    b = fn(P5, 100.0, np.zeros_like(g.r), k)
    assert b.total == 0 and b.nehari == 0 and b.pohozaev == 0


def test_negative_field_rejected():
    g, k = reference(5, 1.0)
    with pytest.raises(ValueError):
        action_w(P5, 100.0, -_bump(g), k)


def test_missing_kernel():
    g, _ = reference(5, 1.0)
    with pytest.raises(ValueError):
        action_u(P5, 100.0, _bump(g), None)


def test_quadratic_part():
    g, k = reference(5, 1.0)
    u = _bump(g)
    b = action_u(P5, 7.0, u, k)
    assert b.total + 0.5 * b.nonlocal_energy == pytest.approx(0.5 * b.kinetic + 3.5 * b.mass, rel=1e-14)


def test_cross_term_symmetry():
    g, k = reference(3, 0.5)
    u = _bump(g)
    p = P3MIX.p
    G = 0.5 * u**2.2 + u**2.6
    assert k.pair_energy(u**p, G) == pytest.approx(k.pair_energy(G, u**p), rel=1e-12)


def test_total_is_combination_of_parts():
    g, k = reference(3, 0.5)
    b = action_w(P3MIX, 1e3, _bump(g), k)
    combo = 0.5 * b.kinetic + 0.5 * b.lam * b.mass - 0.5 * (b.dpp + 2 * b.dpg + b.dgg)
    assert b.total == pytest.approx(combo, rel=1e-12)
    assert min(b.dpp, b.dpg, b.dgg, b.dpgu, b.dggu) > 0


@pytest.mark.parametrize("eps", [10.0, 1e3, 1e6])
def test_relation_A_in_w_formulation(eps):
    form = formulation(P5, eps, "w")
    assert form.coefs[1] == pytest.approx(P5.b * eps ** -scaling_schedule(P5, eps).sigma, rel=1e-12)


@pytest.mark.parametrize("params", [DEFAULTS[5], DEFAULTS[3], P3MIX])
def test_cross_scale_energy_equality(params):
    # I_eps(u) = I*_eps(v) = J_eps(w) along the exact rescaling chain
    eps = 300.0
    g, k = reference(params.N, params.alpha)
    w = g.field(_bump(g, 0.5))
    Jw = action_w(params, eps, w, k).total
    for stage, fn in (("v", action_v), ("u", action_u)):
        f = rescale(w, params, eps, "w", stage)
        t = f.grid.r[-1] / g.r[-1]
        assert fn(params, eps, f, k.scaled(t)).total == pytest.approx(Jw, rel=1e-10)


def test_cross_scale_with_resampling():
    params, eps = DEFAULTS[5], 300.0
    g, k = reference(5, 1.0)
    w = g.field(_bump(g, 2.0))
    v = rescale(w, params, eps, "w", "v")
    back = rescale(v, params, eps, "v", "w", onto=g)
    assert action_w(params, eps, back, k).total == pytest.approx(action_w(params, eps, w, k).total, rel=1e-6)


def test_limit_action_zero_and_scaling():
    N, a = 5, 1.0
    g, k = profile_reference(N, a)
    assert limit_action(np.zeros_like(g.r), k) == 0
    W = extremal_W(g, a)
    ts = np.linspace(0.9, 1.1, 2001)
    vals = [limit_action(t * W, k) for t in ts]
    assert abs(ts[int(np.argmax(vals))] - 1) <= 1e-3


def test_nehari_sign_structure():
    g, k = reference(5, 1.0)
    W = extremal_W(g, 1.0)
    W[-1] = 0.0
    assert nehari_residual(P5, 100.0, 1e-2 * W, k) > 0
    assert nehari_residual(P5, 100.0, 1e2 * W, k) < 0


def test_residuals_of_zero():
    g, k = reference(5, 1.0)
    z = np.zeros_like(g.r)
    assert nehari_residual(P5, 100.0, z, k) == 0 and pohozaev_residual(P5, 100.0, z, k) == 0


@pytest.mark.parametrize("N, alpha", [(3, 1.0), (4, 1.0), (5, 1.0)])
def test_limit_pohozaev_of_w1(N, alpha):
    g, k = profile_reference(N, alpha)
    b = energy_breakdown(formulation(None, None, "limit") if False else _limit_form(N, alpha), k,
                         extremal_W(g, alpha))
    assert abs(b.pohozaev) / b.kinetic < 1e-3


def _limit_form(N, alpha):
    params = ProblemParams(N, alpha, (PowerTerm(0.5 * ((N + alpha) / N + (N + alpha) / (N - 2)), 1.0),))
    return formulation(params, None, "limit")


def test_tau_homogeneity_and_dilation():
    N, a = 4, 1.0
    g, k = reference(N, a)
    W = extremal_W(g, a)
    p = (N + a) / (N - 2)
    assert tau(2 * W, k) == pytest.approx(2 ** (2 - 2 * p) * tau(W, k), rel=1e-12)
    lam = 2.0
    Wl = lam ** (-(N - 2) / 2) * resample(g, W, g.r / lam)
    assert tau(Wl, k) == pytest.approx(tau(W, k), rel=2e-3)
    # exact on the dilated grid
    assert tau(lam ** (-(N - 2) / 2) * W, k.scaled(lam)) == pytest.approx(tau(W, k), rel=1e-12)


def test_tau_zero_field():
    g, k = reference(4, 1.0)
    with pytest.raises(ValueError):
        tau(np.zeros_like(g.r), k)


def test_scalar_projection_critical_closed_form():
    g, k = reference(5, 1.0)
    u = _bump(g)
    eps = 100.0
    b = energy_breakdown(formulation(P5, eps, "w").without_g(), k, u)
    t_exact = ((b.kinetic + b.lam * b.mass) / (b.p * b.dpp)) ** (1 / (2 * b.p - 2))
    t, _ = project_fibering_scalar(P5, eps, u, k, mode="critical")
    assert t == pytest.approx(t_exact, rel=1e-9)
    t2, _ = project_fibering_scalar(P5, eps, 3 * u, k, mode="critical")
    assert t2 == pytest.approx(t / 3, rel=1e-9)


@pytest.mark.parametrize("params", [DEFAULTS[5], P3MIX])
def test_scalar_projection_full(params):
    g, k = reference(params.N, params.alpha)
    u = _bump(g)
    eps = 1e3
    t, val = project_fibering_scalar(params, eps, u, k)
    assert abs(nehari_residual(params, eps, t * u, k, relative=True)) < 1e-8
    assert val == pytest.approx(action_w(params, eps, t * u, k).total, rel=1e-12)
    # global maximum along the ray
    ts = t * np.logspace(-2, 2, 4001)
    assert np.max(fibering_curve(params, eps, u, k, ts)) <= val * (1 + 1e-12)
    # fixed point on the Nehari manifold
    t1, _ = project_fibering_scalar(params, eps, t * u, k)
    assert t1 == pytest.approx(1.0, abs=1e-8)


def test_dilation_projection():
    params, eps = P3MIX, 1e3
    g, k = reference(3, 0.5)
    u = _bump(g)
    t0 = project_fibering_dilation(params, eps, u, k)
    # u(x/t0) lives on the grid dilated by t0
    k0 = k.scaled(t0)
    assert abs(pohozaev_residual(params, eps, u, k0, relative=True)) < 1e-10
    assert project_fibering_dilation(params, eps, u, k0) == pytest.approx(1.0, abs=1e-8)
    ts = np.logspace(-3, 3, 200)
    f = fibering_curve(params, eps, u, k, ts, kind="dilation")
    assert np.count_nonzero(np.diff(np.sign(np.diff(f)))) == 1


def test_dilation_projection_limit_closed_form():
    N, a = 5, 1.0
    g, k = reference(N, a)
    u = _bump(g)
    b = energy_breakdown(formulation(P5, None, "limit"), k, u)
    t_exact = ((N - 2) / (N + a) * b.kinetic / b.dpp) ** (1 / (2 + a))
    assert project_fibering_dilation(P5, 1.0, u, k, mode="limit") == pytest.approx(t_exact, rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(1.0, 1e6))
def test_projected_value_positive(scale, eps):
    # mountain-pass level along any nonnegative ray is positive
    g, k = reference(5, 1.0)
    _, val = project_fibering_scalar(P5, eps, _bump(g, scale), k)
    assert val > 0
