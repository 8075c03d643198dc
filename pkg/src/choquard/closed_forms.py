"""Analytic reference constants and profiles of the critical problem."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import gamma, gammaln

from .radial import RadialGrid, dirichlet_form, lp_norm
from .riesz import RieszKernel, riesz_normalization

__all__ = [
    "riesz_normalization", "hls_sharp_constant", "lieb_constant", "sobolev_constant_exact",
    "bubble", "talenti_amplitude", "extremal_amplitude", "extremal_W", "critical_residual",
    "Constants", "sobolev_constants", "normalization_report", "least_energy_limit", "conformal_potential_constant",
]


def _check(N, alpha):
    if int(N) != N or N < 3 or not 0 < alpha < N:
        raise ValueError("need integer N >= 3 and 0 < alpha < N")


def hls_sharp_constant(N: int, alpha: float) -> float:
    """Sharp constant of int int f(x) f(y) |x-y|^{-(N-alpha)} <= C ||f||^2_{2N/(N+alpha)}."""
    _check(N, alpha)
    return (np.pi ** ((N - alpha) / 2) * gamma(alpha / 2) / gamma((N + alpha) / 2)
            * (gamma(N / 2) / gamma(N)) ** (-alpha / N))


def lieb_constant(N: int, alpha: float, form: str = "printed") -> float:
    """(2 sqrt(pi))^-alpha Gamma((N-alpha)/2)/Gamma((N+alpha)/2) (Gamma(N)/Gamma(N/2))^e.

    ``printed`` uses e = alpha, the form usually quoted next to the extremal
    V_1; ``sharp`` uses e = alpha/N, which equals A_alpha(N) C_alpha(N), the
    sharp constant for the normalised potential I_alpha.  Only the sharp form
    makes V_1 an extremal and W_1 a solution of the critical equation; see
    ``normalization_report``.
    """
    _check(N, alpha)
    if form not in ("printed", "sharp"):
        raise ValueError("form must be 'printed' or 'sharp'")
    e = alpha if form == "printed" else alpha / N
    log = (alpha * np.log(1 / (2 * np.sqrt(np.pi)))
           + gammaln((N - alpha) / 2) - gammaln((N + alpha) / 2)
           + e * (gammaln(N) - gammaln(N / 2)))
    return float(np.exp(log))


def sobolev_constant_exact(N: int) -> float:
    """Best constant in ||grad u||^2 >= S ||u||^2_{2N/(N-2)} (reference value only)."""
    return np.pi * N * (N - 2) * (gamma(N / 2) / gamma(N)) ** (2 / N)


def conformal_potential_constant(N: int, alpha: float) -> float:
    """c with I_alpha * (1+r^2)^{-(N+alpha)/2} = c (1+r^2)^{-(N-alpha)/2}."""
    _check(N, alpha)
    return gamma((N - alpha) / 2) / (2**alpha * gamma((N + alpha) / 2))


def talenti_amplitude(N: int) -> float:
    return (N * (N - 2)) ** ((N - 2) / 4)


def bubble(grid: RadialGrid | np.ndarray, kappa: float = 1.0, N: int | None = None) -> np.ndarray:
    """U_kappa(r) = kappa^{-(N-2)/2} U_1(r/kappa), U_1 = [N(N-2)]^{(N-2)/4} (1+r^2)^{-(N-2)/2}."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    r, N = (grid.r, grid.N) if isinstance(grid, RadialGrid) else (np.asarray(grid, float), N)
    x = r / kappa
    return kappa ** (-(N - 2) / 2) * talenti_amplitude(N) * (1 + x * x) ** (-(N - 2) / 2)


def extremal_amplitude(N: int, alpha: float, S: float | None = None,
                       form: str = "sharp") -> float:
    """W_1 / U_1 built from S and C_*(N, alpha)."""
    S = sobolev_constant_exact(N) if S is None else S
    Cs = lieb_constant(N, alpha, form)
    e = 2 + alpha
    return (((N - 2) / (N + alpha)) ** ((N - 2) / (2 * e))
            * S ** (-(N - 2) * alpha / (4 * e)) * Cs ** (-(N - 2) / (2 * e)))


def extremal_W(grid: RadialGrid | np.ndarray, alpha: float, rho: float = 1.0,
               N: int | None = None, S: float | None = None, form: str = "sharp") -> np.ndarray:
    """W_rho(r) = rho^{-(N-2)/2} W_1(r/rho), a solution of -Delta w = p (I_alpha * w^p) w^{p-1}."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    N = grid.N if isinstance(grid, RadialGrid) else N
    return extremal_amplitude(N, alpha, S, form) * bubble(grid, rho, N)


def critical_residual(grid: RadialGrid, kernel: RieszKernel, w: np.ndarray) -> float:
    """Relative L2 residual of -Delta w = p (I_alpha * w^p) w^{p-1} on interior nodes."""
    from .radial import radial_laplacian

    N, alpha = grid.N, kernel.alpha
    p = (N + alpha) / (N - 2)
    lap = radial_laplacian(grid, w)
    res = -lap - p * kernel.apply(w**p) * w ** (p - 1)
    mu = grid.volumes[:-1]
    return float(np.sqrt(np.sum(mu * res[:-1] ** 2) / np.sum(mu * lap[:-1] ** 2)))


def least_energy_limit(N: int, alpha: float, S_alpha: float) -> float:
    e = 2 + alpha
    return e / (2 * (N - 2)) * ((N - 2) / (N + alpha) * S_alpha) ** ((N + alpha) / e)


@dataclass(frozen=True)
class Constants:
    N: int
    alpha: float
    A_alpha: float
    C_alpha: float
    C_star: float
    C_star_printed: float
    S: float
    S_alpha: float
    S_alpha_quotient: float
    m_inf: float

    @property
    def S_alpha_agreement(self) -> float:
        return abs(self.S_alpha_quotient / self.S_alpha - 1)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["S_alpha_agreement"] = self.S_alpha_agreement
        return d


def sobolev_constants(grid: RadialGrid, kernel: RieszKernel) -> Constants:
    """Constants with S and the S_alpha quotient evaluated on the working grid."""
    N, alpha = grid.N, kernel.alpha
    U = bubble(grid)
    S = dirichlet_form(grid, U) / lp_norm(grid, U, 2 * N / (N - 2)) ** 2
    Cs = lieb_constant(N, alpha, "sharp")
    S_alpha = S / Cs ** ((N - 2) / (N + alpha))
    # Rayleigh quotient on V_1 (any multiple of U_1 gives the same value)
    p = (N + alpha) / (N - 2)
    V = extremal_amplitude(N, alpha, S) * ((N + alpha) / (N - 2)) ** ((N - 2) / (2 * (2 + alpha))) * U
    Vp = V**p
    quotient = dirichlet_form(grid, V) / kernel.pair_energy(Vp, Vp) ** ((N - 2) / (N + alpha))
    return Constants(N, alpha, riesz_normalization(N, alpha), hls_sharp_constant(N, alpha), Cs,
                     lieb_constant(N, alpha, "printed"), S, S_alpha, quotient,
                     least_energy_limit(N, alpha, S_alpha))


def normalization_report(grid: RadialGrid, kernel: RieszKernel) -> dict:
    """Critical-equation residual of W_1 built from each form of C_*."""
    alpha = kernel.alpha
    out = {}
    for form in ("sharp", "printed"):
        W = extremal_W(grid, alpha, form=form)
        out[form] = {"C_star": lieb_constant(grid.N, alpha, form),
                     "W1_at_0": float(W[0]),
                     "residual": critical_residual(grid, kernel, W)}
    out["mismatch"] = out["printed"]["residual"] > 10 * out["sharp"]["residual"]
    return out
