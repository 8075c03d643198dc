"""Radial grids, quadrature and the finite-volume Laplacian on R^N."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import gamma

LAYOUTS = ("uniform", "loglinear")


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere S^{N-1}."""
    return 2.0 * np.pi ** (N / 2) / gamma(N / 2)


def ball_volume(N: int, R: float) -> float:
    return sphere_area(N) * R**N / N


def _cubic_product_weights(r: np.ndarray, N: int) -> np.ndarray:
    # Each interval integrates the cubic interpolant on a 4-node stencil
    # against |S^{N-1}| r^{N-1}; Gauss-Legendre makes the moments exact.
    M = len(r) - 1
    ng = (N + 4) // 2 + 2
    x, gw = np.polynomial.legendre.leggauss(ng)
    k = np.arange(M)
    a, b = r[k], r[k + 1]
    pts = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * x[None, :]
    wts = 0.5 * (b - a)[:, None] * gw[None, :] * sphere_area(N) * pts ** (N - 1)
    start = np.clip(k - 1, 0, M - 3)
    sten = start[:, None] + np.arange(4)[None, :]
    rs = r[sten]
    w = np.zeros(M + 1)
    for j in range(4):
        basis = np.ones_like(pts)
        for m in range(4):
            if m != j:
                basis *= (pts - rs[:, m, None]) / (rs[:, j, None] - rs[:, m, None])
        np.add.at(w, sten[:, j], (basis * wts).sum(axis=1))
    return w


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes 0 = r_0 < ... < r_M = Rmax with weights absorbing |S^{N-1}| r^{N-1}."""

    N: int
    r: np.ndarray
    layout: str = "custom"
    core: float = 0.0
    _weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise ValueError("nodes must start at 0 and increase strictly")
        object.__setattr__(self, "r", r)
        r.setflags(write=False)

    @property
    def M(self) -> int:
        return len(self.r) - 1

    @property
    def Rmax(self) -> float:
        return float(self.r[-1])

    @cached_property
    def weights(self) -> np.ndarray:
        w = self._weights if self._weights is not None else _cubic_product_weights(self.r, self.N)
        w.setflags(write=False)
        return w

    @cached_property
    def h(self) -> np.ndarray:
        return np.diff(self.r)

    @cached_property
    def rmid(self) -> np.ndarray:
        return 0.5 * (self.r[1:] + self.r[:-1])

    @cached_property
    def conductance(self) -> np.ndarray:
        """Edge coefficients |S^{N-1}| r_{k+1/2}^{N-1} / h_k of the Dirichlet form."""
        return sphere_area(self.N) * self.rmid ** (self.N - 1) / self.h

    @cached_property
    def volumes(self) -> np.ndarray:
        """Dual-cell volumes of the finite-volume scheme (sum to the ball volume)."""
        edges = np.concatenate([[0.0], self.rmid, [self.Rmax]])
        return sphere_area(self.N) / self.N * np.diff(edges**self.N)

    @cached_property
    def hash(self) -> str:
        m = hashlib.sha256()
        m.update(str(self.N).encode())
        m.update(np.ascontiguousarray(self.r).tobytes())
        return m.hexdigest()[:16]

    def scaled(self, t: float) -> "RadialGrid":
        """The grid dilated by t; weights scale exactly by t^N."""
        return RadialGrid(self.N, self.r * t, self.layout, self.core * t,
                          _weights=np.array(self.weights) * t**self.N)

    def field(self, values) -> "RadialField":
        return RadialField(self, np.asarray(values, dtype=float))


@dataclass(frozen=True, eq=False)
class RadialField:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != len(self.grid.r):
            raise ValueError("field length does not match grid")

    def to_csv(self, path) -> None:
        g = self.grid
        header = f"N={g.N} Rmax={g.Rmax!r} M={g.M}"
        np.savetxt(path, np.column_stack([g.r, self.values]), delimiter=",",
                   header=header, comments="# ", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "RadialField":
        with open(path) as fh:
            head = fh.readline().lstrip("#").split()
        meta = dict(item.split("=") for item in head)
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        grid = RadialGrid(int(meta["N"]), data[:, 0], layout="custom")
        return cls(grid, data[:, 1])


def build_grid(N: int, Rmax: float, M: int, layout: str = "loglinear",
               core: float | None = None) -> RadialGrid:
    """Build a radial grid.

    ``loglinear`` places nodes at ``core * sinh(x)`` for uniform x, which is
    linear for r << core and geometric for r >> core.
    """
    if M < 64:
        raise ValueError("M must be at least 64")
    if not Rmax > 0:
        raise ValueError("Rmax must be positive")
    if N < 1:
        raise ValueError("dimension must be positive")
    if layout == "uniform":
        return RadialGrid(N, np.linspace(0.0, Rmax, M + 1), "uniform", Rmax)
    if layout != "loglinear":
        raise ValueError(f"unknown layout {layout!r}")
    core = min(0.1, Rmax / 4) if core is None else core
    if not core > 0:
        raise ValueError("core radius must be positive")
    x = np.linspace(0.0, np.arcsinh(Rmax / core), M + 1)
    r = core * np.sinh(x)
    r[-1] = Rmax
    return RadialGrid(N, r, "loglinear", core)


def _check(grid: RadialGrid, f) -> np.ndarray:
    f = f.values if isinstance(f, RadialField) else np.asarray(f, dtype=float)
    if f.shape != grid.r.shape:
        raise ValueError("field does not live on this grid")
    return f


def integrate(grid: RadialGrid, f) -> float:
    return float(grid.weights @ _check(grid, f))


def lp_norm(grid: RadialGrid, f, p: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    return integrate(grid, np.abs(_check(grid, f)) ** p) ** (1.0 / p)


def dirichlet_form(grid: RadialGrid, f, g=None) -> float:
    """Discrete int grad f . grad g (edge-midpoint rule)."""
    df = np.diff(_check(grid, f))
    dg = df if g is None else np.diff(_check(grid, g))
    return float(np.sum(grid.conductance * df * dg))


def stiffness_apply(grid: RadialGrid, f: np.ndarray) -> np.ndarray:
    """Gradient of the Dirichlet form: (S f)_i with S symmetric tridiagonal."""
    flux = grid.conductance * np.diff(f)
    out = np.zeros_like(f)
    out[:-1] -= flux
    out[1:] += flux
    return out


def radial_laplacian(grid: RadialGrid, f) -> np.ndarray:
    """Second-order Laplacian; f'(0)=0 is built in, the last node is extrapolated."""
    f = _check(grid, f)
    lap = -stiffness_apply(grid, f) / grid.volumes
    r = grid.r
    lap[-1] = lap[-2] + (lap[-2] - lap[-3]) * (r[-1] - r[-2]) / (r[-2] - r[-3])
    return lap


def _banded(grid: RadialGrid, diag_extra: np.ndarray) -> np.ndarray:
    # rows 0..M-1 of S + diag(diag_extra); node M is pinned to zero
    c = grid.conductance
    M = grid.M
    ab = np.zeros((3, M))
    ab[1] = np.concatenate([[0.0], c[:-1]]) + c + diag_extra[:M]
    ab[0, 1:] = -c[:-1][: M - 1]
    ab[2, :-1] = -c[:-1][: M - 1]
    return ab


def h1_solve(grid: RadialGrid, m: float, rhs) -> np.ndarray:
    """Solve (-Delta + m) phi = rhs with phi(Rmax) = 0."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    rhs = _check(grid, rhs)
    V = grid.volumes
    ab = _banded(grid, m * V)
    phi = np.zeros_like(rhs)
    phi[:-1] = solve_banded((1, 1), ab, (V * rhs)[:-1])
    return phi


def metric_solve(grid: RadialGrid, m: float, b: np.ndarray, weights=None) -> np.ndarray:
    """Solve (S + m W) x = b with W = diag(weights) and x(Rmax) = 0."""
    W = grid.weights if weights is None else weights
    ab = _banded(grid, m * W)
    x = np.zeros_like(b)
    x[:-1] = solve_banded((1, 1), ab, b[:-1])
    return x


def resample(grid_from: RadialGrid, f, r_new, tail_power: float | None = None) -> np.ndarray:
    """Monotone cubic resampling; beyond Rmax use f ~ r^-tail_power (or 0)."""
    from scipy.interpolate import PchipInterpolator

    f = _check(grid_from, f)
    r_new = np.asarray(r_new, dtype=float)
    with np.errstate(over="ignore", divide="ignore"):  # flat stretches give zero secant slopes
        pchip = PchipInterpolator(grid_from.r, f, extrapolate=False)
    out = pchip(np.minimum(r_new, grid_from.Rmax))
    beyond = r_new > grid_from.Rmax
    if np.any(beyond):
        if tail_power is None or f[-1] == 0.0:
            out[beyond] = 0.0
        else:
            out[beyond] = f[-1] * (r_new[beyond] / grid_from.Rmax) ** (-tail_power)
    return out
