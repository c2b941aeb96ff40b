"""Discretisations of the round sphere S^n.

Three grid modes are supported:

* ``radial`` -- a single node; fields are constants and every derivative is 0.
* ``axisymmetric`` -- fields depend on the polar angle only.  Works for any
  n >= 2 through the warped structure dtheta^2 + sin^2(theta) g_{S^{n-1}}.
* ``full2d`` -- (theta, psi) latitude/longitude grid on S^2.

Nodes in theta are cell centred, theta_i = (i + 1/2) pi / N, so the poles are
never sampled.  Derivatives are returned in the orthonormal frame
(e_theta, e_2, ..., e_n) of the round metric, which makes sigma_{ij} the
identity everywhere downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np


class GridMode(str, Enum):
    RADIAL = "radial"
    AXISYMMETRIC = "axisymmetric"
    FULL2D = "full2d"


class GridError(ValueError):
    pass


def sphere_area(n: int) -> float:
    """Area omega_n of the unit sphere S^n in R^{n+1}."""
    return 2.0 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


@lru_cache(maxsize=64)
def _polar_weights(N: int, n: int) -> np.ndarray:
    # Interpolatory rule on cell-centred nodes: expand the integrand in the
    # cosine series fixed by its samples (DCT-II) and integrate each mode
    # against sin^{n-1}.  For n = 2 this is Fejer's first rule.
    theta = (np.arange(N) + 0.5) * math.pi / N
    x, w = np.polynomial.legendre.leggauss(2 * N + 200)
    s = 0.5 * math.pi * (x + 1.0)
    base = np.sin(s) ** (n - 1) * w * (0.5 * math.pi)
    m = np.arange(N)
    moments = np.cos(np.outer(m, s)) @ base
    coef = np.full(N, 2.0 / N)
    coef[0] = 1.0 / N
    weights = np.cos(np.outer(theta, m)) @ (coef * moments)
    weights.setflags(write=False)
    return weights


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Nodes, quadrature weights and spacing for one discretisation of S^n.

    Fields on the grid are flat float arrays of length ``size``; for
    ``full2d`` the flattening is row-major with theta as the slow index.
    """

    mode: GridMode
    n: int
    shape: tuple[int, ...]
    theta: np.ndarray
    psi: np.ndarray
    weights: np.ndarray
    h: float
    _sin: np.ndarray = field(repr=False, default=None)
    _cot: np.ndarray = field(repr=False, default=None)

    @property
    def size(self) -> int:
        return int(self.weights.size)

    @property
    def area(self) -> float:
        return sphere_area(self.n)

    def node_theta(self) -> np.ndarray:
        """Polar angle of every node (flattened)."""
        if self.mode is GridMode.FULL2D:
            return np.repeat(self.theta, self.shape[1])
        return self.theta.copy()

    def node_psi(self) -> np.ndarray:
        if self.mode is GridMode.FULL2D:
            return np.tile(self.psi, self.shape[0])
        return np.zeros(self.size)

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(theta, psi)`` at every node."""
        out = np.asarray(func(self.node_theta(), self.node_psi()), dtype=float)
        return np.broadcast_to(out, (self.size,)).copy()

    def check(self, values) -> np.ndarray:
        arr = np.asarray(values, dtype=float)
        if arr.shape != (self.size,):
            raise GridError(
                f"field has shape {arr.shape}, grid expects ({self.size},)"
            )
        return arr


def build_grid(mode, n: int, resolution=None) -> SphereGrid:
    """Build a grid.

    ``resolution`` is ignored for ``radial``, an int N for ``axisymmetric`` and
    an ``(N_theta, N_psi)`` pair (or a single int, meaning ``(N, 2N)``) for
    ``full2d``.
    """
    mode = GridMode(mode)
    if n < 2:
        raise GridError(f"unsupported dimension n={n}; need n >= 2")

    if mode is GridMode.RADIAL:
        w = np.array([sphere_area(n)])
        return SphereGrid(mode, n, (1,), np.zeros(1), np.zeros(0), w, math.inf,
                          np.ones(1), np.zeros(1))

    if mode is GridMode.AXISYMMETRIC:
        N = int(resolution)
        if N < 8:
            raise GridError(f"resolution {N} too small; need at least 8 nodes")
        theta = (np.arange(N) + 0.5) * math.pi / N
        w = sphere_area(n - 1) * _polar_weights(N, n)
        return SphereGrid(mode, n, (N,), theta, np.zeros(0), np.array(w),
                          math.pi / N, np.sin(theta), np.cos(theta) / np.sin(theta))

    if n != 2:
        raise GridError(f"unsupported combination: full2d grids need n = 2, got n={n}")
    if np.ndim(resolution) == 0:
        Nt, Np = int(resolution), 2 * int(resolution)
    else:
        Nt, Np = (int(x) for x in resolution)
    if Nt < 8 or Np < 8:
        raise GridError(f"resolution {(Nt, Np)} too small; need at least 8 per coordinate")
    if Np % 2:
        raise GridError("full2d needs an even number of azimuthal nodes")
    theta = (np.arange(Nt) + 0.5) * math.pi / Nt
    psi = np.arange(Np) * 2.0 * math.pi / Np
    wt = sphere_area(1) * _polar_weights(Nt, 2) / Np
    w = np.repeat(wt, Np)
    ht, hp = math.pi / Nt, 2.0 * math.pi / Np
    h = min(ht, math.sin(theta[0]) * hp)
    return SphereGrid(GridMode.FULL2D, 2, (Nt, Np), theta, psi, w, h,
                      np.sin(theta), np.cos(theta) / np.sin(theta))


def _pad_theta(a: np.ndarray, sign: float) -> np.ndarray:
    """Add ghost rows across both poles (axis 0)."""
    if a.ndim == 1:
        return np.concatenate(([sign * a[0]], a, [sign * a[-1]]))
    half = a.shape[1] // 2
    top = sign * np.roll(a[0], half)
    bottom = sign * np.roll(a[-1], half)
    return np.vstack((top, a, bottom))


def differentiate(values, grid: SphereGrid, parity: str = "even"):
    """Covariant gradient and Hessian of a scalar field w.r.t. the round metric.

    Returns ``(grad, hess)`` with shapes ``(size, n)`` and ``(size, n, n)``,
    components in the orthonormal frame.  Second-order central differences;
    the pole closure reflects the field through the pole with the given parity.
    """
    phi = grid.check(values)
    n, N = grid.n, grid.size
    grad = np.zeros((N, n))
    hess = np.zeros((N, n, n))
    if grid.mode is GridMode.RADIAL:
        return grad, hess
    sign = {"even": 1.0, "odd": -1.0}[parity]
    ht = math.pi / grid.shape[0]

    if grid.mode is GridMode.AXISYMMETRIC:
        p = _pad_theta(phi, sign)
        d1 = (p[2:] - p[:-2]) / (2 * ht)
        d2 = (p[2:] - 2 * p[1:-1] + p[:-2]) / ht**2
        grad[:, 0] = d1
        hess[:, 0, 0] = d2
        tang = grid._cot * d1
        for a in range(1, n):
            hess[:, a, a] = tang
        return grad, hess

    Nt, Np = grid.shape
    hp = 2.0 * math.pi / Np
    a = phi.reshape(Nt, Np)
    p = _pad_theta(a, sign)
    ft = (p[2:] - p[:-2]) / (2 * ht)
    ftt = (p[2:] - 2 * p[1:-1] + p[:-2]) / ht**2
    fp = (np.roll(a, -1, axis=1) - np.roll(a, 1, axis=1)) / (2 * hp)
    fpp = (np.roll(a, -1, axis=1) - 2 * a + np.roll(a, 1, axis=1)) / hp**2
    pp = np.roll(p, -1, axis=1) - np.roll(p, 1, axis=1)
    ftp = (pp[2:] - pp[:-2]) / (4 * ht * hp)
    s = grid._sin[:, None]
    cot = grid._cot[:, None]
    grad[:, 0] = ft.ravel()
    grad[:, 1] = (fp / s).ravel()
    hess[:, 0, 0] = ftt.ravel()
    off = ((ftp - cot * fp) / s).ravel()
    hess[:, 0, 1] = off
    hess[:, 1, 0] = off
    hess[:, 1, 1] = (fpp / s**2 + cot * ft).ravel()
    return grad, hess


def divergence(vec, grid: SphereGrid) -> np.ndarray:
    """Divergence of a tangent field given by orthonormal-frame components.

    ``vec`` has shape ``(size, n)``; only the theta component is used on
    axisymmetric grids.  Frame components flip sign through the pole.
    """
    vec = np.asarray(vec, dtype=float)
    n, N = grid.n, grid.size
    if vec.shape != (N, n):
        raise GridError(f"expected vector field of shape {(N, n)}, got {vec.shape}")
    if grid.mode is GridMode.RADIAL:
        return np.zeros(N)
    ht = math.pi / grid.shape[0]
    if grid.mode is GridMode.AXISYMMETRIC:
        x = vec[:, 0]
        p = _pad_theta(x, -1.0)
        return (p[2:] - p[:-2]) / (2 * ht) + (n - 1) * grid._cot * x
    Nt, Np = grid.shape
    hp = 2.0 * math.pi / Np
    xt = vec[:, 0].reshape(Nt, Np)
    xp = vec[:, 1].reshape(Nt, Np)
    p = _pad_theta(xt, -1.0)
    dt = (p[2:] - p[:-2]) / (2 * ht)
    dp = (np.roll(xp, -1, axis=1) - np.roll(xp, 1, axis=1)) / (2 * hp)
    out = dt + grid._cot[:, None] * xt + dp / grid._sin[:, None]
    return out.ravel()


def laplacian(values, grid: SphereGrid) -> np.ndarray:
    _, hess = differentiate(values, grid)
    return np.trace(hess, axis1=1, axis2=2)


def integrate(values, grid: SphereGrid) -> float:
    """Quadrature of a nodal field over S^n (correctly rounded sum)."""
    f = grid.check(values)
    if not np.all(np.isfinite(f)):
        raise GridError("cannot integrate a field with non-finite values")
    return math.fsum((grid.weights * f).tolist())
