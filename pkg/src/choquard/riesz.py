"""Dense radial discretisation of the Riesz potential I_alpha * f."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gamma, hyp2f1

from .radial import RadialGrid, sphere_area, _check


def riesz_normalization(N: int, alpha: float) -> float:
    if not 0 < alpha < N:
        raise ValueError("alpha must lie in (0, N)")
    return gamma((N - alpha) / 2) / (gamma(alpha / 2) * np.pi ** (N / 2) * 2**alpha)


def spherical_mean(N: int, alpha: float, r, s) -> np.ndarray:
    """Average of |x-y|^{-(N-alpha)} over directions, |x| = r, |y| = s."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    lam = (N - alpha) / 2
    big = np.maximum(r, s)
    small = np.minimum(r, s)
    z = (small / big) ** 2
    return big ** (-2 * lam) * hyp2f1(lam, 1 - alpha / 2, N / 2, z)


_GL_FAR = np.polynomial.legendre.leggauss(6)
_GL_NEAR = np.polynomial.legendre.leggauss(24)
_GL_SING = np.polynomial.legendre.leggauss(32)


def _cell_integral(N, alpha, ri, s, ws):
    rho = sphere_area(N) * s ** (N - 1)
    val = spherical_mean(N, alpha, ri, s) * rho * ws
    # nodes that round onto the singularity carry negligible weight
    return np.where(np.isfinite(val), val, 0.0).sum(axis=-1)


def _regular(N, alpha, ri, a, b, rule):
    x, w = rule
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    s = mid[..., None] + half[..., None] * x
    ws = half[..., None] * w
    return _cell_integral(N, alpha, ri[..., None], s, ws)


def _graded(N, alpha, ri, a, b, left_singular):
    # s = end + (b-a) u^m clusters nodes at the singular endpoint
    x, w = _GL_SING
    u = 0.5 * (x + 1)
    wu = 0.5 * w
    m = max(3, int(np.ceil(2.0 / alpha)))
    h = (b - a)[..., None]
    s = a[..., None] + h * u**m if left_singular else b[..., None] - h * u**m
    ws = h * m * u ** (m - 1) * wu
    return _cell_integral(N, alpha, ri[..., None], s, ws)


def _half_cells(r):
    # dual cell of node j is [r_{j-1/2}, r_{j+1/2}], split at r_j;
    # half-cell 2j-1 is left of r_j, half-cell 2j is right of r_j
    mid = 0.5 * (r[1:] + r[:-1])
    a = np.empty(2 * (len(r) - 1))
    b = np.empty_like(a)
    a[0::2], b[0::2] = r[:-1], mid
    a[1::2], b[1::2] = mid, r[1:]
    return a, b


def _tail_vector(N, alpha, r, R, beta):
    # int_R^inf k(r_i, s) rho(s) (s/R)^{-beta} ds via s = R/v, three panels in v
    x, w = _GL_NEAR
    out = np.zeros_like(r)
    for lo, hi in ((0.0, 0.5), (0.5, 0.9), (0.9, 1.0)):
        v = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x
        wv = 0.5 * (hi - lo) * w
        s = R / v
        jac = R / v**2
        integrand = (spherical_mean(N, alpha, r[:, None], s[None, :])
                     * sphere_area(N) * s ** (N - 1) * v**beta * jac)
        out += integrand @ wv
    return out


def _build_matrix(grid: RadialGrid, alpha: float, rows_per_chunk: int = 64) -> np.ndarray:
    """P_ij = int over the dual cell of node j of k(r_i, s) |S^{N-1}| s^{N-1} ds."""
    N, r, M = grid.N, grid.r, grid.M
    a, b = _half_cells(r)
    owner = (np.arange(2 * M) + 1) // 2
    H = np.zeros((M + 1, 2 * M))
    for i0 in range(0, M + 1, rows_per_chunk):
        i1 = min(M + 1, i0 + rows_per_chunk)
        ri = np.repeat(r[i0:i1, None], 2 * M, axis=1)
        H[i0:i1] = _regular(N, alpha, ri, np.broadcast_to(a, ri.shape),
                            np.broadcast_to(b, ri.shape), _GL_FAR)
    idx = np.arange(M + 1)
    # half-cells owned by nearby nodes get a denser rule
    for off in range(-7, 7):
        hc = 2 * idx + off
        ok = (hc >= 0) & (hc < 2 * M)
        i, hc = idx[ok], hc[ok]
        if off in (-1, 0):
            H[i, hc] = _graded(N, alpha, r[i], a[hc], b[hc], left_singular=(off == 0))
        else:
            H[i, hc] = _regular(N, alpha, r[i], a[hc], b[hc], _GL_NEAR)
    P = np.zeros((M + 1, M + 1))
    np.add.at(P.T, owner, H.T)
    return riesz_normalization(N, alpha) * P


@dataclass(eq=False)
class RieszKernel:
    """K with (I_alpha * f)(r_i) ~ sum_j K_ij f_j, self-adjoint in ``measure``.

    ``raw`` is the product-integration matrix; ``K`` is its symmetrisation
    mu^{-1} (mu P + P^T mu) / 2, which is what ``apply`` uses.
    """

    grid: RadialGrid
    alpha: float
    raw: np.ndarray
    measure: np.ndarray
    tail: np.ndarray | None = None
    K: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mu = self.measure
        B = mu[:, None] * self.raw
        self.K = 0.5 * (B + B.T) / mu[:, None]

    @property
    def N(self) -> int:
        return self.grid.N

    def scaled(self, t: float) -> "RieszKernel":
        """Kernel on the grid dilated by t (exact: entries scale by t^alpha)."""
        g = self.grid.scaled(t)
        tail = None if self.tail is None else self.tail * t**self.alpha
        return RieszKernel(g, self.alpha, self.raw * t**self.alpha,
                           self.measure * t**self.N, tail)

    def apply(self, f) -> np.ndarray:
        f = _check(self.grid, f)
        out = self.K @ f
        if self.tail is not None:
            out = out + self.tail * f[-1]
        return out

    def pair_energy(self, f, g) -> float:
        """int (I_alpha * f) g dx in the kernel's measure."""
        f = _check(self.grid, f)
        g = _check(self.grid, g)
        return float((self.measure * g) @ (self.K @ f))

    def with_tail(self, decay: float) -> "RieszKernel":
        """Copy that extends data beyond Rmax as f(Rmax) (r/Rmax)^-decay."""
        g = self.grid
        tail = riesz_normalization(g.N, self.alpha) * _tail_vector(g.N, self.alpha, g.r, g.Rmax, decay)
        return RieszKernel(g, self.alpha, self.raw, self.measure, tail)

    @property
    def hash(self) -> str:
        m = hashlib.sha256(self.grid.hash.encode())
        m.update(repr(float(self.alpha)).encode())
        return m.hexdigest()[:16]


def build_kernel(grid: RadialGrid, alpha: float, measure: str = "volumes",
                 cache_dir: str | Path | None = None) -> RieszKernel:
    """Assemble the dense kernel; ``measure`` picks the inner product it is symmetric in."""
    if not 0 < alpha < grid.N:
        raise ValueError("alpha must lie in (0, N)")
    mu = np.array(grid.volumes if measure == "volumes" else grid.weights)
    if np.any(mu <= 0):
        raise ValueError("kernel measure must be positive")
    if cache_dir is not None:
        path = Path(cache_dir)
        key = f"riesz_N{grid.N}_a{alpha!r}_{grid.hash}"
        npy = path / f"{key}.npy"
        if npy.exists():
            return RieszKernel(grid, alpha, np.load(npy), mu)
        raw = _build_matrix(grid, alpha)
        path.mkdir(parents=True, exist_ok=True)
        np.save(npy, raw)
        manifest = {"N": grid.N, "alpha": alpha, "grid_hash": grid.hash, "M": grid.M,
                    "Rmax": grid.Rmax, "layout": grid.layout, "core": grid.core}
        (path / f"{key}.json").write_text(json.dumps(manifest, indent=2))
        return RieszKernel(grid, alpha, raw, mu)
    return RieszKernel(grid, alpha, _build_matrix(grid, alpha), mu)
