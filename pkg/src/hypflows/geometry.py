"""Extrinsic geometry of starshaped radial graphs in H^{n+1}.

The ambient space is the warped product dr^2 + sinh(r)^2 sigma.  A starshaped
hypersurface is the graph {(r(xi), xi)} over S^n; everything here is computed
from the nodal radius r and its covariant derivatives on the sphere grid.

All tensors are stored per node in the orthonormal frame of sigma, so
``g`` and ``h`` have shape ``(size, n, n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sphere import GridMode, SphereGrid, differentiate, integrate

R_MAX = 25.0


class GeometryError(ValueError):
    pass


def warp_factors(r):
    """Return (lambda, lambda', Gamma) = (sinh r, cosh r, cosh r - 1)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise GeometryError("warp factors need r >= 0")
    gam = 2.0 * np.sinh(0.5 * r) ** 2
    return np.sinh(r), np.cosh(r), gam


def chi(r):
    """Antiderivative of 1/sinh(r): phi = chi(r) = log tanh(r/2)."""
    return np.log(np.tanh(0.5 * np.asarray(r, dtype=float)))


def chi_inverse(phi):
    return 2.0 * np.arctanh(np.exp(np.asarray(phi, dtype=float)))


@dataclass(frozen=True, eq=False)
class GraphHypersurface:
    grid: SphereGrid
    r: np.ndarray

    def __post_init__(self):
        r = self.grid.check(self.r)
        object.__setattr__(self, "r", r)

    @property
    def phi(self) -> np.ndarray:
        return chi(self.r)

    @classmethod
    def from_phi(cls, grid, phi):
        return cls(grid, chi_inverse(phi))

    @classmethod
    def sphere(cls, grid, radius):
        return cls(grid, np.full(grid.size, float(radius)))


@dataclass(frozen=True, eq=False)
class GeometryData:
    grid: SphereGrid
    r: np.ndarray
    lam: np.ndarray
    dlam: np.ndarray
    Gamma: np.ndarray
    dr: np.ndarray
    ddr: np.ndarray
    dphi: np.ndarray
    ddphi: np.ndarray
    grad_sq: np.ndarray
    v: np.ndarray
    u: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    h: np.ndarray
    weingarten: np.ndarray
    H: np.ndarray
    kappa: np.ndarray
    area_weight: np.ndarray

    @property
    def n(self) -> int:
        return self.grid.n

    def integrate(self, values) -> float:
        """Integral over M with respect to d(mu) = lambda^n v d(sigma)."""
        return integrate(np.asarray(values, dtype=float) * self.area_weight, self.grid)

    @property
    def area(self) -> float:
        return integrate(self.area_weight, self.grid)


def _is_diagonal(grid: SphereGrid) -> bool:
    return grid.mode is not GridMode.FULL2D


def principal_curvatures(g, h, diagonal=False):
    """Eigenvalues of g^{-1} h from the symmetric pencil h x = kappa g x.

    Sorted ascending along the last axis.
    """
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if diagonal:
        dg = np.diagonal(g, axis1=-2, axis2=-1)
        if np.any(dg <= 0):
            bad = int(np.argwhere(dg <= 0)[0][0])
            raise GeometryError(f"metric is not positive definite at node {bad}")
        return np.sort(np.diagonal(h, axis1=-2, axis2=-1) / dg, axis=-1)
    try:
        L = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(g)
        bad = int(np.argwhere(eig.min(axis=-1) <= 0)[0][0])
        raise GeometryError(f"metric is not positive definite at node {bad}") from None
    Linv = np.linalg.inv(L)
    A = Linv @ h @ np.swapaxes(Linv, -1, -2)
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    return np.linalg.eigvalsh(A)


def graph_geometry(surface: GraphHypersurface) -> GeometryData:
    grid, r = surface.grid, surface.r
    if np.any(~np.isfinite(r)):
        raise GeometryError("radius has non-finite values")
    if np.any(r <= 0):
        bad = int(np.argmin(r))
        raise GeometryError(f"degenerate radius r={r[bad]:.3g} at node {bad}")
    if np.any(r > R_MAX):
        raise GeometryError(f"radius exceeds the supported range r <= {R_MAX}")
    n = grid.n
    lam, dlam, gam = warp_factors(r)
    dr, ddr = differentiate(r, grid)
    if not (np.all(np.isfinite(dr)) and np.all(np.isfinite(ddr))):
        raise GeometryError("non-finite derivative data")

    # phi = chi(r): D phi = Dr / lambda, D^2 phi = D^2 r / lambda - lambda' Dr Dr / lambda^2
    dphi = dr / lam[:, None]
    ddphi = ddr / lam[:, None, None] - (dlam / lam**2)[:, None, None] * (
        dr[:, :, None] * dr[:, None, :]
    )
    grad_sq = np.einsum("ni,ni->n", dphi, dphi)
    v = np.sqrt(1.0 + grad_sq)
    u = lam / v

    eye = np.eye(n)
    outer = dphi[:, :, None] * dphi[:, None, :]
    g = lam[:, None, None] ** 2 * (eye + outer)
    ginv = (eye - outer / (v**2)[:, None, None]) / lam[:, None, None] ** 2
    h = (dlam / (lam * v))[:, None, None] * g - (lam / v)[:, None, None] * ddphi
    W = ginv @ h
    H = np.trace(W, axis1=1, axis2=2)
    kappa = principal_curvatures(g, h, diagonal=_is_diagonal(grid))
    return GeometryData(
        grid=grid, r=r, lam=lam, dlam=dlam, Gamma=gam, dr=dr, ddr=ddr,
        dphi=dphi, ddphi=ddphi, grad_sq=grad_sq, v=v, u=u, g=g, ginv=ginv,
        h=h, weingarten=W, H=H, kappa=kappa, area_weight=lam**n * v,
    )


def mean_curvature_formula(geo: GeometryData) -> np.ndarray:
    """H from the closed expression in terms of phi (independent of g^{-1} h)."""
    n = geo.n
    P = np.eye(n) - geo.dphi[:, :, None] * geo.dphi[:, None, :] / (geo.v**2)[:, None, None]
    contraction = np.einsum("nij,nij->n", P, geo.ddphi)
    return n * geo.dlam / (geo.lam * geo.v) - contraction / (geo.lam * geo.v)


def geometry_identity_residuals(geo: GeometryData) -> dict:
    """Residuals of grad(lambda') = lambda dr and Hess_M(lambda') = lambda' g - u h.

    The left-hand sides are obtained by differencing the nodal field
    lambda' = cosh r directly, so the residuals measure discretisation
    consistency of the whole geometry stack.
    """
    grid = geo.grid
    L = geo.dlam
    DL, DDL = differentiate(L, grid)
    grad_res = DL - geo.lam[:, None] * geo.dr

    n = geo.n
    eye = np.eye(n)
    lam, dlam, dr = geo.lam, geo.dlam, geo.dr
    # Difference tensor between the Levi-Civita connections of g and sigma,
    # lowered index l: lambda lambda' (r_i d_jl + r_j d_il - r_l d_ij) + r_ij r_l.
    ll = (lam * dlam)[:, None, None, None]
    T = ll * (
        dr[:, :, None, None] * eye[None, None, :, :]
        + dr[:, None, :, None] * eye[None, :, None, :]
        - dr[:, None, None, :] * eye[None, :, :, None]
    ) + geo.ddr[:, :, :, None] * dr[:, None, None, :]
    C = np.einsum("nkl,nijl->nkij", geo.ginv, T)
    hess_M = DDL - np.einsum("nkij,nk->nij", C, DL)
    hess_res = hess_M - (dlam[:, None, None] * geo.g - geo.u[:, None, None] * geo.h)
    scale = max(1.0, float(np.max(np.abs(dlam[:, None, None] * geo.g))))
    return {
        "gradient": float(np.max(np.abs(grad_res))) if grad_res.size else 0.0,
        "hessian": float(np.max(np.abs(hess_res))) / scale,
    }


def sphere_closed_forms(n: int, r: float) -> dict:
    from .sphere import sphere_area

    return {
        "u": math.sinh(r),
        "H": n / math.tanh(r),
        "kappa": 1.0 / math.tanh(r),
        "area": sphere_area(n) * math.sinh(r) ** n,
    }
