"""Scaling schedule, predicted exponents, rate fits and test-function expansions.

The exponent helpers only use +, -, *, / so they work unchanged on
``fractions.Fraction`` inputs; that is how the identities are checked exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict, field
from fractions import Fraction

import numpy as np

from .problem import ProblemParams, validate_hypotheses, InadmissibleError

__all__ = [
    "ScalingSchedule", "scaling_schedule", "RateEntry", "RatePrediction", "predict_rates",
    "sigma_exponent", "denominator", "eps1_exponent", "eps2_exponent", "xi_total_exponent", "xi_stage_exponent", "gap_exponent",
    "identity_checks", "rho0", "fit_rate", "FitResult", "smoothstep_cutoff",
    "testfunction_expansion", "ExpansionTable",
]


# ---------------------------------------------------------------- exponent algebra

def denominator(N, alpha, q2):
    """D = 4 + (N-2) q2 - (N+alpha)."""
    return 4 + (N - 2) * q2 - (N + alpha)


def sigma_exponent(N, alpha, q2):
    return ((N + alpha) - (N - 2) * q2) / denominator(N, alpha, q2)


def eps1_exponent(N, alpha, q2):
    """eps1 = eps^{(N+alpha)(1+sigma)/4}."""
    return (N + alpha) * (1 + sigma_exponent(N, alpha, q2)) / 4


def eps2_exponent(N, alpha, q2):
    """eps2 = eps^{(N-2)(1+sigma)/4}."""
    return (N - 2) * (1 + sigma_exponent(N, alpha, q2)) / 4


def xi_stage_exponent(N, alpha, q2):
    """(eps exponent, ln eps exponent) of the stage scale between w and w~."""
    if N == 3:
        return -(3 + alpha - q2) / ((q2 - 1 - alpha) * (q2 + 1 - alpha)), 0 * q2
    if N == 4:
        return 0 * q2, -2 / (2 * q2 - alpha)
    return 0 * q2, 0 * q2


def xi_total_exponent(N, alpha, q2):
    """(eps exponent, ln eps exponent) of the total rescale u -> w~."""
    if N == 3:
        return -1 / (q2 - 1 - alpha), 0 * q2
    if N == 4:
        e = -2 / (2 * q2 - alpha)
        return e, e
    return -2 / denominator(N, alpha, q2), 0 * q2


def gap_exponent(N, alpha, q2):
    """(eps exponent, ln eps exponent) of m_inf - m_eps."""
    if N == 3:
        return -(3 + alpha - q2) / (2 * (q2 - 1 - alpha)), 0 * q2
    if N == 4:
        e = -(4 + alpha - 2 * q2) / (2 * q2 - alpha)
        return e, e
    return -sigma_exponent(N, alpha, q2), 0 * q2


def _mass_wtilde_exponent(N, alpha, q2):
    if N == 3:
        return (3 + alpha - q2) / (2 * (q2 - 1 - alpha)), 0 * q2
    if N == 4:
        return 0 * q2, 1 + 0 * q2
    return 0 * q2, 0 * q2


def _u0_exponent(N, alpha, q2):
    a, b = xi_total_exponent(N, alpha, q2)
    k = -(N - 2) / Fraction(2) if isinstance(q2, Fraction) else -(N - 2) / 2
    return k * a, k * b


def _mass_u_exponent(N, alpha, q2):
    if N == 3:
        return -(q2 + 1 - alpha) / (2 * (q2 - 1 - alpha)), 0 * q2
    if N == 4:
        d = 2 * q2 - alpha
        return -4 / d, -(4 + alpha - 2 * q2) / d
    return -4 / denominator(N, alpha, q2), 0 * q2


def identity_checks(N, alpha, q2) -> dict[str, bool]:
    """Exact consistency identities of the exponent tables (use Fraction inputs).

    relation_A: eps^-sigma = eps1^-1 eps2^q2.
    stage: -(1+sigma)/2 plus the stage exponent gives the total exponent
    (for N=4 the eps and ln eps parts must both equal the (eps ln eps) exponent).
    gap_chain: eps^-sigma xi_stage^{((N+alpha)-(N-2)q2)/2} has the gap exponent.
    mass_chain (N=3): sigma/2 + |stage| equals the w~ mass growth exponent.
    u_mass_chain: eps^-(1+sigma) xi_stage^2 ||w~||^2 has the ||u||^2 exponent.
    """
    s = sigma_exponent(N, alpha, q2)
    half = Fraction(1, 2) if isinstance(q2, Fraction) else 0.5
    st_e, st_l = xi_stage_exponent(N, alpha, q2)
    tot_e, tot_l = xi_total_exponent(N, alpha, q2)
    gap_e, gap_l = gap_exponent(N, alpha, q2)
    mw_e, mw_l = _mass_wtilde_exponent(N, alpha, q2)
    mu_e, mu_l = _mass_u_exponent(N, alpha, q2)
    k = ((N + alpha) - (N - 2) * q2) * half
    out = {
        "relation_A": -s == -eps1_exponent(N, alpha, q2) + q2 * eps2_exponent(N, alpha, q2),
        "stage": (-(1 + s) * half + st_e == tot_e) and (st_l == tot_l),
        "gap_chain": (-s + k * st_e == gap_e) and (k * st_l == gap_l),
        "u_mass_chain": (-(1 + s) + 2 * st_e + mw_e == mu_e) and (2 * st_l + mw_l == mu_l),
    }
    if N == 3:
        out["mass_chain"] = s * half + abs(st_e) == mw_e
    return out


# ---------------------------------------------------------------- schedule

@dataclass(frozen=True)
class ScalingSchedule:
    eps: float
    sigma: float
    eps1: float
    eps2: float
    delta: float
    q2: float
    log_eps1: float = field(repr=False, default=0.0)
    log_eps2: float = field(repr=False, default=0.0)

    @property
    def relation_error(self) -> float:
        """|eps^-sigma / (eps1^-1 eps2^q2) - 1|, evaluated in logs."""
        lhs = -self.sigma * np.log(self.eps)
        return float(abs(np.expm1(lhs - (-self.log_eps1 + self.q2 * self.log_eps2))))

    def g_coefficient(self, q: float) -> float:
        """eps1^-1 eps2^q: the factor multiplying c s^q in eps1^-1 G(eps2 s)."""
        return float(np.exp(-self.log_eps1 + q * self.log_eps2))


def scaling_schedule(params: ProblemParams, eps: float) -> ScalingSchedule:
    if not eps > 0:
        raise ValueError("eps must be positive")
    N, a, q2 = params.N, params.alpha, params.q2
    s = sigma_exponent(N, a, q2)
    if not s > 0:
        raise InadmissibleError(validate_hypotheses(params))
    le = np.log(eps)
    l1 = eps1_exponent(N, a, q2) * le
    l2 = eps2_exponent(N, a, q2) * le
    return ScalingSchedule(float(eps), float(s), float(np.exp(l1)), float(np.exp(l2)),
                           float(np.exp(-s * le)), float(q2), float(l1), float(l2))


# ---------------------------------------------------------------- predictions

@dataclass(frozen=True)
class RateEntry:
    """value ~ eps^eps_exponent (ln eps)^log_exponent."""

    observable: str
    eps_exponent: float
    log_exponent: float
    relation: str = "~"

    @property
    def model(self) -> str:
        if self.log_exponent == 0:
            return "power"
        if self.eps_exponent == self.log_exponent:
            return "log-corrected"
        if self.eps_exponent == 0:
            return "log"
        return "mixed"

    @property
    def exponent(self) -> float:
        return self.log_exponent if self.model == "log" else self.eps_exponent


@dataclass(frozen=True)
class RatePrediction:
    N: int
    alpha: float
    q2: float
    sigma: float
    entries: tuple[RateEntry, ...]

    def __getitem__(self, name: str) -> RateEntry:
        for e in self.entries:
            if e.observable == name:
                return e
        raise KeyError(name)

    def as_rows(self) -> list[dict]:
        return [dict(asdict(e), model=e.model) for e in self.entries]


def predict_rates(params: ProblemParams) -> RatePrediction:
    report = validate_hypotheses(params)
    if not report.admissible:
        raise InadmissibleError(report)
    N, a, q2 = params.N, params.alpha, params.q2
    s = sigma_exponent(N, a, q2)
    gap = gap_exponent(N, a, q2)
    rows = [
        ("xi_total", xi_total_exponent(N, a, q2), "~"),
        ("xi_stage", xi_stage_exponent(N, a, q2), "~" if N >= 5 else "<~"),
        ("u0", _u0_exponent(N, a, q2), "~"),
        ("mass_u", _mass_u_exponent(N, a, q2), "~"),
        ("mass_wtilde", _mass_wtilde_exponent(N, a, q2), "~"),
        ("gap", gap, "~"),
        ("kinetic_correction", gap, "O"),
        ("dpp_correction", gap, "O"),
    ]
    entries = tuple(RateEntry(name, float(e), float(l), rel) for name, (e, l), rel in rows)
    return RatePrediction(N, a, q2, float(s), entries)


def rho0(params: ProblemParams, grid, kernel) -> float:
    """Limit dilation of W_1 for N >= 5 from the balance of mass and the q2 cross term."""
    from .closed_forms import extremal_W

    N, a, q2, b = params.N, params.alpha, params.q2, params.b
    if N < 5:
        raise ValueError("rho0 needs N >= 5 (W_1 is not square integrable for N = 3, 4)")
    W = extremal_W(grid, a)
    p = params.p
    mass = float(grid.volumes @ W**2)
    # W_1 ~ r^{-(N-2)}: add the L^2 tail beyond Rmax
    from .radial import sphere_area
    R = grid.Rmax
    mass += sphere_area(N) * W[-1] ** 2 * R**N / (N - 4)
    cross = kernel.pair_energy(W**p, W**q2)
    D = denominator(N, a, q2)
    return (b * ((N + a) - (N - 2) * q2) / 2 * cross / mass) ** (2 / D)


# ---------------------------------------------------------------- fitting

@dataclass(frozen=True)
class FitResult:
    exponent: float
    prefactor: float
    r_squared: float
    model: str
    n: int


def fit_rate(samples, model: str = "power") -> FitResult:
    """Least squares of log value against log eps, log(eps ln eps) or log ln eps."""
    data = np.asarray(sorted(samples), dtype=float)
    if data.ndim != 2 or data.shape[0] < 4:
        raise ValueError("need at least 4 (eps, value) samples")
    eps, val = data[:, 0], data[:, 1]
    if np.any(val <= 0) or np.any(eps <= 0):
        raise ValueError("eps and values must be positive")
    if np.log10(eps.max() / eps.min()) < 1.5:
        raise ValueError("samples must span at least 1.5 decades")
    if model == "power":
        x = np.log(eps)
    elif model == "log-corrected":
        if np.any(eps <= 1):
            raise ValueError("log-corrected fits need eps > 1")
        x = np.log(eps * np.log(eps))
    elif model == "log":
        if np.any(eps <= 1):
            raise ValueError("log fits need eps > 1")
        x = np.log(np.log(eps))
    else:
        raise ValueError(f"unknown model {model!r}")
    y = np.log(val)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([slope, icpt])
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return FitResult(float(slope), float(np.exp(icpt)), float(r2), model, len(x))


# ---------------------------------------------------------------- test functions

def smoothstep_cutoff(r, R: float) -> np.ndarray:
    """1 on [0, R], quintic smoothstep down to 0 on [R, 2R]; |eta'| <= 15/(8R) < 2/R."""
    x = np.clip((np.asarray(r, float) - R) / R, 0.0, 1.0)
    return np.clip(1.0 - x**3 * (10 - 15 * x + 6 * x * x), 0.0, 1.0)


@dataclass
class ExpansionTable:
    which: str
    N: int
    scales: np.ndarray
    columns: dict
    fits: dict

    def rows(self) -> list[dict]:
        return [{"scale": float(s), **{k: float(v[i]) for k, v in self.columns.items()}}
                for i, s in enumerate(self.scales)]


def _loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def testfunction_expansion(grid, kernel, which: str, scales) -> ExpansionTable:
    """Cut-off bubble (``u_kappa``) or cut-off extremal (``eta_l_W1``) integrals.

    The Dirichlet-energy defect of u_kappa is measured against the same-grid
    energy of the uncut bubble, so grid bias cancels in the small difference.
    """
    from .closed_forms import bubble, extremal_W, sobolev_constant_exact
    from .radial import dirichlet_form

    N, alpha = grid.N, kernel.alpha
    scales = np.asarray(sorted(scales), dtype=float)
    mu = grid.volumes
    p = (N + alpha) / (N - 2)
    cols: dict[str, np.ndarray] = {}
    fits: dict[str, float] = {}
    if which == "u_kappa":
        hmin = grid.h[0]
        if scales.min() < 10 * hmin or scales.max() > 0.5:
            raise ValueError("kappa must lie in [10 h_0, 0.5]")
        phi = smoothstep_cutoff(grid.r, 1.0)
        grad_def, mass, dpp = [], [], []
        for k in scales:
            U = bubble(grid, k)
            u = phi * U
            grad_def.append(dirichlet_form(grid, U) - dirichlet_form(grid, u))
            mass.append(mu @ u**2)
            dpp.append(kernel.pair_energy(u**p, u**p))
        cols["grad_defect"] = np.array(grad_def)
        cols["mass"] = np.array(mass)
        cols["dpp"] = np.array(dpp)
        cols["S_N_over_2"] = np.full_like(scales, sobolev_constant_exact(N) ** (N / 2))
        fits["grad_defect"] = _loglog_slope(scales, np.abs(cols["grad_defect"]))
        if N == 4:
            fits["mass"] = _loglog_slope(scales, cols["mass"] / np.abs(np.log(scales)))
        else:
            fits["mass"] = _loglog_slope(scales, cols["mass"])
        return ExpansionTable(which, N, scales, cols, fits)
    if which == "eta_l_W1":
        if scales.min() < 4 or scales.max() > grid.Rmax / 4:
            raise ValueError("l must lie in [4, Rmax/4]")
        W = extremal_W(grid, alpha)
        kin, mass = [], []
        for l in scales:
            f = smoothstep_cutoff(grid.r, l) * W
            kin.append(dirichlet_form(grid, f))
            mass.append(mu @ f**2)
        cols["kinetic"] = np.array(kin)
        cols["mass"] = np.array(mass)
        if N == 3:
            fits["mass"] = _loglog_slope(scales, cols["mass"])
        elif N == 4:
            ratio = cols["mass"] / np.log(scales)
            cols["mass_over_ln"] = ratio
            fits["mass_over_ln_drift"] = float(ratio.max() / ratio.min() - 1)
        else:
            fits["mass"] = _loglog_slope(scales, cols["mass"])
        return ExpansionTable(which, N, scales, cols, fits)
    raise ValueError("which must be 'u_kappa' or 'eta_l_W1'")
