"""Energies, constraint functionals and fibering projections.

Every formulation (u, v, w, w~ and the limit problem) has the shape

    J(f) = 1/2 |grad f|^2 + lam/2 |f|^2 - 1/2 int (I_alpha * F(f)) F(f),
    F(s) = s^p + sum_i C_i s^{q_i},

so a formulation is fully described by ``lam`` and the coefficients C_i.
Nonlocal terms are built from the pair energies P_ab = int (I * f^{e_a}) f^{e_b}
with e = (p, q_1, ..., q_k); scalar fibering s -> J(s f) is then a closed form in s.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .asymptotics import scaling_schedule
from .problem import ProblemParams
from .radial import RadialField, dirichlet_form
from .riesz import RieszKernel

__all__ = [
    "Formulation", "formulation", "EnergyBreakdown", "energy_breakdown", "action_u", "action_v",
    "action_w", "action_wtilde", "limit_action", "nehari_residual", "pohozaev_residual", "tau",
    "project_fibering_scalar", "project_fibering_dilation", "limit_fibering_value", "fibering_curve",
]

STAGES = ("u", "v", "w", "w_tilde", "limit")


@dataclass(frozen=True)
class Formulation:
    """Mass coefficient and nonlinearity coefficients of one rescaling stage."""

    N: int
    alpha: float
    lam: float
    exps: np.ndarray
    coefs: np.ndarray
    stage: str = "w"

    @property
    def p(self) -> float:
        return (self.N + self.alpha) / (self.N - 2)

    def without_g(self) -> "Formulation":
        return Formulation(self.N, self.alpha, self.lam, self.exps[:1], self.coefs[:1], self.stage)

    def limit(self) -> "Formulation":
        return Formulation(self.N, self.alpha, 0.0, self.exps[:1], self.coefs[:1], "limit")

    def F(self, f):
        return sum(c * f**e for c, e in zip(self.coefs, self.exps))

    def dF(self, f):
        return sum(c * e * f ** (e - 1) for c, e in zip(self.coefs, self.exps))

    def d2F(self, f):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = sum(c * e * (e - 1) * f ** (e - 2) for c, e in zip(self.coefs, self.exps))
        return np.where(f > 0, out, 0.0)


def formulation(params: ProblemParams, eps: float | None, stage: str = "w",
                xi: float | None = None) -> Formulation:
    """Coefficients of the ``stage`` functional; ``xi`` is the w -> w~ stage scale."""
    if stage not in STAGES:
        raise ValueError(f"stage must be one of {STAGES}")
    N, a = params.N, params.alpha
    exps = np.concatenate([[params.p], params.qs])
    if stage == "limit":
        return Formulation(N, a, 0.0, exps[:1], np.ones(1), "limit")
    if eps is None or not eps > 0:
        raise ValueError("eps must be positive")
    le = np.log(eps)
    if stage == "u":
        lam, l1, l2 = eps, 0.0, 0.0
    elif stage == "v":
        lam, l1, l2 = 1.0, (N + a) / 4 * le, (N - 2) / 4 * le
    else:
        sch = scaling_schedule(params, eps)
        lam, l1, l2 = sch.delta, sch.log_eps1, sch.log_eps2
        if stage == "w_tilde":
            if xi is None or not xi > 0:
                raise ValueError("w_tilde needs a positive stage scale xi")
            lx = np.log(xi)
            lam, l1, l2 = lam * xi**2, l1 - (N + a) / 2 * lx, l2 - (N - 2) / 2 * lx
    coefs = np.concatenate([[1.0], params.cs * np.exp(-l1 + params.qs * l2)])
    return Formulation(N, a, float(lam), exps, coefs, stage)


@dataclass(frozen=True)
class EnergyBreakdown:
    """All integrals of one field in one formulation.

    dpg/dgg use G-hat = sum_i C_i f^{q_i}; dpgu/dggu use g-hat(f) f in the second slot.
    """

    kinetic: float
    mass: float
    dpp: float
    dpg: float
    dgg: float
    dpgu: float
    dggu: float
    lam: float
    N: int
    alpha: float
    pairs: np.ndarray = field(repr=False, compare=False)
    form: Formulation = field(repr=False, compare=False)

    @property
    def p(self) -> float:
        return (self.N + self.alpha) / (self.N - 2)

    @property
    def nonlocal_energy(self) -> float:
        return self.dpp + 2 * self.dpg + self.dgg

    @property
    def total(self) -> float:
        return 0.5 * self.kinetic + 0.5 * self.lam * self.mass - 0.5 * self.nonlocal_energy

    @property
    def nehari(self) -> float:
        p = self.p
        return (self.kinetic + self.lam * self.mass
                - (p * self.dpp + p * self.dpg + self.dpgu + self.dggu))

    @property
    def pohozaev(self) -> float:
        N, a = self.N, self.alpha
        return ((N - 2) / 2 * self.kinetic + N / 2 * self.lam * self.mass
                - (N + a) / 2 * self.nonlocal_energy)

    @property
    def tau(self) -> float:
        return (self.N - 2) / (self.N + self.alpha) * self.kinetic / self.dpp

    def record(self) -> dict:
        keys = ("kinetic", "mass", "dpp", "dpg", "dgg", "dpgu", "dggu")
        out = {k: float(getattr(self, k)) for k in keys}
        out.update(action=self.total, nehari=self.nehari, pohozaev=self.pohozaev)
        return out

    # closed forms along the two fibering curves
    def scalar_value(self, s):
        s = np.asarray(s, float)
        e, C, P = self.form.exps, self.form.coefs, self.pairs
        quad = 0.5 * s**2 * (self.kinetic + self.lam * self.mass)
        nl = sum(C[a] * C[b] * P[a, b] * s ** (e[a] + e[b])
                 for a in range(len(e)) for b in range(len(e)))
        return quad - 0.5 * nl

    def scalar_slope(self, s):
        s = np.asarray(s, float)
        e, C, P = self.form.exps, self.form.coefs, self.pairs
        lin = s * (self.kinetic + self.lam * self.mass)
        nl = sum(C[a] * C[b] * P[a, b] * (e[a] + e[b]) * s ** (e[a] + e[b] - 1)
                 for a in range(len(e)) for b in range(len(e)))
        return lin - 0.5 * nl

    def dilation_value(self, t):
        N, a = self.N, self.alpha
        t = np.asarray(t, float)
        return (0.5 * t ** (N - 2) * self.kinetic + 0.5 * self.lam * t**N * self.mass
                - 0.5 * t ** (N + a) * self.nonlocal_energy)


def _values(kernel: RieszKernel, f) -> np.ndarray:
    f = f.values if isinstance(f, RadialField) else np.asarray(f, dtype=float)
    if f.shape != kernel.grid.r.shape:
        raise ValueError("field does not live on the kernel's grid")
    if np.any(f < 0):
        raise ValueError("fields must be nonnegative")
    return f


def energy_breakdown(form: Formulation, kernel: RieszKernel, f) -> EnergyBreakdown:
    if kernel is None:
        raise ValueError("a Riesz kernel is required")
    f = _values(kernel, f)
    grid = kernel.grid
    mu = kernel.measure
    powers = np.array([f**e for e in form.exps])
    pot = np.array([kernel.apply(v) for v in powers])
    P = (powers * mu) @ pot.T
    P = 0.5 * (P + P.T)
    C, e = form.coefs, form.exps
    dpp = P[0, 0]
    dpg = float(C[1:] @ P[0, 1:]) if len(C) > 1 else 0.0
    dgg = float(C[1:] @ P[1:, 1:] @ C[1:]) if len(C) > 1 else 0.0
    dpgu = float((C[1:] * e[1:]) @ P[0, 1:]) if len(C) > 1 else 0.0
    dggu = float(C[1:] @ P[1:, 1:] @ (C[1:] * e[1:])) if len(C) > 1 else 0.0
    kin = dirichlet_form(grid, f)
    mass = float(mu @ f**2)
    return EnergyBreakdown(kin, mass, float(dpp), dpg, dgg, dpgu, dggu, form.lam,
                           form.N, form.alpha, P, form)


def action_u(params: ProblemParams, eps: float, u, kernel: RieszKernel) -> EnergyBreakdown:
    """I_eps(u) = 1/2|grad u|^2 + eps/2 |u|^2 - 1/2 int (I * F(u)) F(u)."""
    return energy_breakdown(formulation(params, eps, "u"), kernel, u)


def action_v(params: ProblemParams, eps: float, v, kernel: RieszKernel) -> EnergyBreakdown:
    return energy_breakdown(formulation(params, eps, "v"), kernel, v)


def action_w(params: ProblemParams, eps: float, w, kernel: RieszKernel) -> EnergyBreakdown:
    """J_eps(w) with G evaluated as eps1^-1 G(eps2 w)."""
    return energy_breakdown(formulation(params, eps, "w"), kernel, w)


def action_wtilde(params: ProblemParams, eps: float, wt, kernel: RieszKernel,
                  xi: float) -> EnergyBreakdown:
    return energy_breakdown(formulation(params, eps, "w_tilde", xi), kernel, wt)


def limit_action(w, kernel: RieszKernel) -> float:
    """J_inf(w) = 1/2 |grad w|^2 - 1/2 D_pp(w)."""
    f = _values(kernel, w)
    p = (kernel.N + kernel.alpha) / (kernel.N - 2)
    fp = f**p
    return 0.5 * dirichlet_form(kernel.grid, f) - 0.5 * kernel.pair_energy(fp, fp)


def nehari_residual(params, eps, w, kernel, relative: bool = False) -> float:
    b = action_w(params, eps, w, kernel)
    return b.nehari / b.kinetic if relative and b.kinetic else b.nehari


def pohozaev_residual(params, eps, w, kernel, relative: bool = False) -> float:
    b = action_w(params, eps, w, kernel)
    return b.pohozaev / b.kinetic if relative and b.kinetic else b.pohozaev


def tau(w, kernel: RieszKernel) -> float:
    """(N-2)/(N+alpha) |grad w|^2 / D_pp(w)."""
    f = _values(kernel, w)
    if not np.any(f > 0):
        raise ValueError("tau is undefined for the zero field")
    N, a = kernel.N, kernel.alpha
    fp = f ** ((N + a) / (N - 2))
    return (N - 2) / (N + a) * dirichlet_form(kernel.grid, f) / kernel.pair_energy(fp, fp)


def _select(params, eps, mode, stage="w", xi=None) -> Formulation:
    if mode == "limit":
        return formulation(params, None, "limit")
    form = formulation(params, eps, stage, xi)
    if mode == "critical":
        return form.without_g()
    if mode != "full":
        raise ValueError("mode must be 'full', 'critical' or 'limit'")
    return form


def _scalar_max(b: EnergyBreakdown, span: float = 1e4, n: int = 801) -> tuple[float, float]:
    # global scan on a log grid, then a sign change of the slope around the best node
    A = b.kinetic + b.lam * b.mass
    if not A > 0:
        raise ValueError("fibering needs a nonzero field")
    # the pure power balance gives the natural centre of the scan
    e, C, P = b.form.exps, b.form.coefs, b.pairs
    s0 = (A / max(b.p * C[0] ** 2 * P[0, 0], 1e-300)) ** (1 / (2 * b.p - 2))
    s = s0 * np.logspace(-np.log10(span), np.log10(span), n)
    vals = b.scalar_value(s)
    i = int(np.argmax(vals))
    if i == 0 or i == n - 1:
        raise RuntimeError("no interior maximum of the fibering map")
    lo, hi = s[i - 1], s[i + 1]
    d_lo, d_hi = b.scalar_slope(lo), b.scalar_slope(hi)
    if d_lo > 0 > d_hi:
        t = brentq(b.scalar_slope, lo, hi, xtol=1e-15 * s[i], rtol=4 * np.finfo(float).eps,
                   maxiter=200)
    else:
        t = s[i]
    return float(t), float(b.scalar_value(t))


def project_fibering_scalar(params, eps, w, kernel, mode: str = "full",
                            stage: str = "w", xi=None) -> tuple[float, float]:
    """(t*, J(t* w)) at the global maximum of t -> J(t w) over t > 0.

    ``mode="critical"`` drops G, ``mode="limit"`` also drops the mass term.
    """
    b = energy_breakdown(_select(params, eps, mode, stage, xi), kernel, w)
    return _scalar_max(b)


def limit_fibering_value(kernel: RieszKernel, w) -> tuple[float, float]:
    """(t*, max_t J_inf(t w)) in closed form."""
    f = _values(kernel, w)
    N, a = kernel.N, kernel.alpha
    p = (N + a) / (N - 2)
    kin = dirichlet_form(kernel.grid, f)
    fp = f**p
    D = kernel.pair_energy(fp, fp)
    t = (kin / (p * D)) ** (1 / (2 * p - 2))
    return float(t), float(0.5 * t * t * kin - 0.5 * t ** (2 * p) * D)


def _dilation_root(b: EnergyBreakdown) -> float:
    N, a = b.N, b.alpha
    A = (N + a) / 2 * b.nonlocal_energy
    B = N / 2 * b.lam * b.mass
    C = (N - 2) / 2 * b.kinetic
    if not A > 0:
        raise RuntimeError("dilation root not bracketed (vanishing nonlocal term)")
    # phi(t)/t^2 = A t^alpha - B - C t^-2 is increasing; solve in log t
    def phi(x):
        t = np.exp(x)
        return A * t**a - B - C / (t * t)
    x0 = np.log(((B + C) / A) ** (1 / a)) if B + C > 0 else 0.0
    lo, hi = x0 - 1.0, x0 + 1.0
    while phi(lo) > 0:
        lo -= 2.0
    while phi(hi) < 0:
        hi += 2.0
    return float(np.exp(brentq(phi, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=300)))


def project_fibering_dilation(params, eps, w, kernel, mode: str = "full",
                              stage: str = "w", xi=None) -> float:
    """Unique t0 with P(w_t0) = 0 for w_t(x) = w(x/t).

    On a radial grid w_t is w on the grid dilated by t, so kinetic, mass and
    nonlocal parts scale exactly as t^{N-2}, t^N, t^{N+alpha}.
    """
    b = energy_breakdown(_select(params, eps, mode, stage, xi), kernel, w)
    return _dilation_root(b)


def fibering_curve(params, eps, w, kernel, ts, kind: str = "scalar", mode: str = "full"):
    """J along t -> t w (``scalar``) or t -> w(./t) (``dilation``) at the given t."""
    b = energy_breakdown(_select(params, eps, mode), kernel, w)
    return b.scalar_value(ts) if kind == "scalar" else b.dilation_value(ts)
