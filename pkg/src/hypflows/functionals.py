"""Integral quantities on closed starshaped hypersurfaces.

Covers curvature integrals and the Minkowski residual, the weighted volume
W0 = int_M u dmu with its sphere profile h0(R) = omega_n sinh(R)^{n+1}, the
two Michael-Simon type inequalities and the monotonicity audit of a flow's
time series.

Weights f are always extended radially: f = fbar(r) for a RadialProfile,
f = ftilde(cosh r) for a WeightProfile.  With that extension
<grad(f lambda'), nu> = d/dr(f lambda') / v.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .geometry import GeometryData
from .profiles import RadialProfile, WeightProfile
from .sphere import sphere_area
from .symmetric import elementary_all


class FunctionalError(ValueError):
    pass


def curvature_integrals(geo: GeometryData, m: int) -> dict:
    n = geo.n
    if not 1 <= m <= n:
        raise FunctionalError(f"m={m} outside 1..{n}")
    E = elementary_all(geo.kappa)
    lp_term = geo.integrate(geo.dlam * E[:, m - 1])
    u_term = geo.integrate(geo.u * E[:, m])
    return {
        "area": geo.area,
        "int_Em": geo.integrate(E[:, m]),
        "int_lp_Em1": lp_term,
        "int_u_Em": u_term,
        "minkowski_residual": lp_term - u_term,
    }


def weighted_volume(geo: GeometryData) -> float:
    """W0 = int_M u dmu = (n+1) int_Omega cosh(r) dvol."""
    return geo.integrate(geo.u)


def h0(R, n: int):
    """W0 of the geodesic ball of radius R."""
    return sphere_area(n) * np.sinh(R) ** (n + 1)


def h0_inverse(W, n: int) -> float:
    if not W > 0:
        raise FunctionalError("h0^{-1} needs W > 0")
    return float(np.arcsinh((W / sphere_area(n)) ** (1.0 / (n + 1))))


def h0_inverse_bisection(W, n: int) -> float:
    """Independent inverse by root bracketing, used as a cross-check."""
    if not W > 0:
        raise FunctionalError("h0^{-1} needs W > 0")
    hi = 1.0
    while h0(hi, n) < W:
        hi *= 2.0
    return float(brentq(lambda R: h0(R, n) - W, 0.0, hi, xtol=1e-15, rtol=1e-15))


def p_k(R, n: int, k: int, f_const: float):
    """omega_n f^{(n+1-k)/(n-k)} cosh(R)^{k-1} sinh(R)^{n-k+1}."""
    if k >= n:
        raise FunctionalError(f"k=n unsupported in (1.13): exponent (n+1-k)/(n-k) needs k <= n-1 (k={k}, n={n})")
    if k < 1:
        raise FunctionalError("k must be >= 1")
    return (sphere_area(n) * f_const ** ((n + 1 - k) / (n - k))
            * np.cosh(R) ** (k - 1) * np.sinh(R) ** (n - k + 1))


def enclosed_quantities(geo_or_radius, k: int, f_const: float, n: Optional[int] = None) -> dict:
    """W0, h0(R), h0^{-1}(W0) and p_k(h0^{-1}(W0)) for a surface or a ball radius."""
    if isinstance(geo_or_radius, GeometryData):
        n = geo_or_radius.n
        W = weighted_volume(geo_or_radius)
    else:
        if n is None:
            raise FunctionalError("dimension n required when passing a radius")
        W = float(h0(float(geo_or_radius), n))
    R = h0_inverse(W, n)
    return {
        "W0": W,
        "h0_R": float(h0(R, n)),
        "R": R,
        "p_k": float(p_k(R, n, k, f_const)),
        "omega_n": sphere_area(n),
    }


def weight_on_surface(geo: GeometryData, weight):
    """Nodal f and df/dr for the radial extension of ``weight``."""
    r = geo.r
    if isinstance(weight, RadialProfile):
        return weight.f(r), weight.df(r)
    if isinstance(weight, WeightProfile):
        if weight.f is None:
            raise FunctionalError("weight profile has no f (k = n and only gtilde given)")
        f = np.asarray(weight.f(geo.dlam), dtype=float)
        return np.broadcast_to(f, r.shape).copy(), np.asarray(weight.df(geo.dlam)) * geo.lam
    c = float(weight)
    return np.full(r.shape, c), np.zeros(r.shape)


def _weight_at_radius(weight, R):
    if isinstance(weight, RadialProfile):
        return float(weight.f(R))
    if isinstance(weight, WeightProfile):
        return float(weight.f(math.cosh(R)))
    return float(weight)


@dataclass
class InequalityReport:
    k: int
    lhs: float
    rhs: float
    gap: float
    relative_gap: float
    curvature_term: float
    ambient_term: float
    boundary_term: float = 0.0
    volume_chain: Optional[float] = None
    f_const: Optional[float] = None
    W0: Optional[float] = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def michael_simon_report(geo: GeometryData, k: int, weight, f_const=None) -> InequalityReport:
    """Evaluate both sides of the Michael-Simon type inequality of order k.

    k = 1: lhs = int cosh r sqrt(f^2 E1^2 + |grad f|^2) - int <grad(f cosh r), nu>,
    rhs = omega_n^{1/n} (int f^{n/(n-1)})^{(n-1)/n}.

    2 <= k <= n-1: E_k / E_{k-1} weighted version with
    rhs = p_k(h0^{-1}(W0))^{1/(n-k+1)} (int f^{(n-k+1)/(n-k)} E_{k-1})^{(n-k)/(n-k+1)}.
    ``f_const`` is the constant value of f inserted into p_k; by default the
    value of the weight on the ball with the same W0.  ``f_const="sphere"``
    inserts sinh(R)^{-(n-k)} with R = h0^{-1}(W0), the only constant for which
    spheres of every radius attain equality.
    """
    n = geo.n
    if k >= n:
        raise FunctionalError(f"k=n unsupported in (1.13) (k={k}, n={n})")
    if k < 1:
        raise FunctionalError("k must be >= 1")
    E = elementary_all(geo.kappa)
    if k >= 2 and not np.all(E[:, 1:k + 1] > 0):
        bad = int(np.argmin(np.min(E[:, 1:k + 1], axis=1)))
        raise FunctionalError(f"cone violation: kappa not in Gamma_{k}^+ at node {bad}")
    f, f_r = weight_on_surface(geo, weight)
    # |grad^M f|^2 = g^{ij} f_i f_j with f_i = f_r r_i
    df = f_r[:, None] * geo.dr
    grad_f_sq = np.einsum("ni,nij,nj->n", df, geo.ginv, df)
    Ek, Ek1 = E[:, k], E[:, k - 1]
    curv = geo.integrate(geo.dlam * np.sqrt(f**2 * Ek**2 + grad_f_sq * Ek1**2))
    normal_deriv = (f_r * geo.dlam + f * geo.lam) / geo.v
    ambient = geo.integrate(normal_deriv * Ek1)
    lhs = curv - ambient
    notes = []
    W = weighted_volume(geo)
    if k == 1:
        rhs = sphere_area(n) ** (1.0 / n) * geo.integrate(f ** (n / (n - 1))) ** ((n - 1) / n)
        chain = None
    else:
        R = h0_inverse(W, n)
        if f_const is None:
            f_const = _weight_at_radius(weight, R)
            notes.append("f_const taken as the weight on the ball with equal W0")
        elif f_const == "sphere":
            f_const = math.sinh(R) ** (-(n - k))
            notes.append("f_const taken as sinh(R)^-(n-k) on the ball with equal W0")
        chain = float(p_k(R, n, k, f_const))
        q = (n - k + 1) / (n - k)
        rhs = chain ** (1.0 / (n - k + 1)) * geo.integrate(f**q * Ek1) ** ((n - k) / (n - k + 1))
    gap = lhs - rhs
    return InequalityReport(k, float(lhs), float(rhs), float(gap), float(gap / abs(rhs)),
                            float(curv), float(ambient), 0.0, chain, f_const, float(W), notes)


def weighted_power_integral(geo: GeometryData, f) -> float:
    """int_M f^{n/(n-1)} dmu."""
    n = geo.n
    return geo.integrate(np.asarray(f) ** (n / (n - 1)))


def evolution_rates(geo: GeometryData, F) -> dict:
    """Time derivatives implied by a normal speed F.

    ``area``: int H F dmu; ``W0``: int (n+1) cosh(r) F dmu; ``lambda_prime``:
    pointwise d/dt cosh r at fixed xi for the radial-graph parametrisation,
    lambda F v = u F v^2 (reduces to u F where Dr = 0).
    """
    n = geo.n
    return {
        "area": geo.integrate(geo.H * F),
        "W0": geo.integrate((n + 1) * geo.dlam * F),
        "lambda_prime": geo.lam * F * geo.v,
    }


def fpow_rate_stated(geo: GeometryData, profile: RadialProfile) -> float:
    """-int fbar^{1/(n-1)} v^{-1} (n/(n-1) fbar' v + fbar H)^2 dmu."""
    n = geo.n
    f, fr = profile.f(geo.r), profile.df(geo.r)
    c = n / (n - 1)
    return -geo.integrate(f ** (1 / (n - 1)) / geo.v * (c * fr * geo.v + f * geo.H) ** 2)


def fpow_rate_geometric(geo: GeometryData, profile: RadialProfile, F) -> float:
    """Exact first variation of int fbar(r)^{n/(n-1)} dmu under normal speed F.

    d/dt int G dmu = int (dG/dnu + G H) F dmu with G = fbar^{n/(n-1)}, where
    dG/dnu = G'(r) / v.
    """
    n = geo.n
    f, fr = profile.f(geo.r), profile.df(geo.r)
    c = n / (n - 1)
    return geo.integrate(f ** (1 / (n - 1)) * (c * fr / geo.v + f * geo.H) * F)


def _flag_increases(values, slack, direction):
    vals = np.asarray(values, dtype=float)
    if direction == "nonincreasing":
        jumps = vals[1:] - vals[:-1]
    else:
        jumps = vals[:-1] - vals[1:]
    tol = slack * np.maximum(np.abs(vals[:-1]), 1e-300)
    bad = np.nonzero(jumps > tol)[0]
    return [int(i + 1) for i in bad]


def monotonicity_audit(series, law: str, slack: float = 1e-8, weight_kind: Optional[str] = None,
                       equality_weight: bool = False) -> dict:
    """Check the monotone quantities recorded in a TimeSeries-like mapping.

    ``series`` maps column names to sequences (at least 3 records).
    law is ``"mcf"`` or ``"icf"``.  ``weight_kind`` for icf is ``"ode"``,
    ``"superlinear"`` (lambda' g' >= g) or anything else, in which case the
    int E_{k-1} gtilde check is labelled empirical.
    """
    cols = {k: np.asarray(v, dtype=float) for k, v in dict(series).items()}
    nrec = len(cols.get("t", []))
    if nrec < 3:
        raise FunctionalError("series shorter than 3 records")
    report = {"law": law, "records": nrec, "slack": slack, "checks": {}}

    def check(name, column, direction, status=None):
        vals = cols[column]
        finite = np.isfinite(vals)
        if not np.all(finite):
            report["checks"][name] = {"column": column, "skipped": "non-finite values"}
            return
        bad = _flag_increases(vals, slack, direction)
        entry = {"column": column, "direction": direction, "pass": not bad,
                 "violations": bad[:20]}
        if status:
            entry["status"] = status
        report["checks"][name] = entry

    if law == "mcf":
        check("int_f_pow_nonincreasing", "int_f_pow", "nonincreasing")
    else:
        check("W0_nondecreasing", "W0", "nondecreasing")
        status = "proved" if weight_kind in ("ode", "superlinear") else "empirical"
        check("int_Ek1_g_nonincreasing", "int_Ek1_g", "nonincreasing", status)

    if "gap" in cols and np.all(np.isfinite(cols["gap"])):
        gaps = cols["gap"]
        rhs = np.abs(cols.get("rhs", np.ones_like(gaps)))
        entry = {"pass": bool(np.all(gaps >= -slack * rhs)),
                 "min_relative_gap": float(np.min(gaps / rhs))}
        if equality_weight:
            entry["final_relative_gap"] = float(gaps[-1] / rhs[-1])
        report["checks"]["gap_nonnegative"] = entry

    if "max_grad_sq" in cols:
        report["decay_rate"] = fit_decay_rate(cols["t"], cols["max_grad_sq"])
    report["pass"] = all(c.get("pass", True) for c in report["checks"].values())
    return report


def fit_decay_rate(t, values, floor: float = 1e-26) -> Optional[float]:
    """Slope of log(values) against t over the trailing half of the records.

    Records at or below ``floor`` (exact zeros once a mode has decayed past
    rounding) are dropped before the trailing half is taken.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    keep = y > floor
    t, y = t[keep], y[keep]
    half = t.size // 2
    t, y = t[half:], y[half:]
    if t.size < 2:
        return None
    slope, _ = np.polyfit(t, np.log(y), 1)
    return float(slope)


def perturbed_radius(grid, R: float, amplitudes) -> np.ndarray:
    """r = R (1 + sum_j a_j cos(j theta)), j = 1, 2, ...  on the grid nodes."""
    theta = grid.node_theta()
    out = np.ones_like(theta)
    for j, a in enumerate(amplitudes, start=1):
        out = out + a * np.cos(j * theta)
    return R * out


def random_perturbation_study(n: int, k: int, weight, rng, samples: int = 1000, R: float = 1.0,
                              amplitude: float = 0.1, modes: int = 3, resolution: int = 64,
                              spheres: int = 5, rounding_floor: float = 1e-12, f_const=None) -> dict:
    """Evaluate the inequality of order k on random axisymmetric perturbations of B_R.

    Amplitudes a_j are uniform in [-amplitude, amplitude]; ``spheres`` exact
    spheres are included.  The discretisation error of each gap is estimated
    by Richardson, |gap_N - gap_{N/2}| / 3, floored at rounding_floor |rhs|.
    Samples leaving Gamma_k^+ (k >= 2) are skipped and counted.
    """
    from .geometry import GraphHypersurface, graph_geometry
    from .sphere import build_grid

    fine = build_grid("axisymmetric", n, resolution)
    coarse = build_grid("axisymmetric", n, resolution // 2)
    rows = []
    skipped = 0
    for i in range(samples + spheres):
        a = np.zeros(modes) if i < spheres else rng.uniform(-amplitude, amplitude, modes)
        try:
            rep = michael_simon_report(graph_geometry(GraphHypersurface(fine, perturbed_radius(fine, R, a))),
                                       k, weight, f_const)
            rep_c = michael_simon_report(graph_geometry(GraphHypersurface(coarse, perturbed_radius(coarse, R, a))),
                                         k, weight, f_const)
        except FunctionalError:
            skipped += 1
            continue
        r_nodes = perturbed_radius(fine, R, a)
        est = max(abs(rep.gap - rep_c.gap) / 3.0, rounding_floor * abs(rep.rhs))
        rows.append((rep.gap, rep.relative_gap, est, float(r_nodes.max() - r_nodes.min())))
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    gap, rel, est, osc = arr.T
    negative = gap < -10.0 * est
    rigid_bad = (rel < 1e-6) & (osc >= 1e-4)
    return {
        "evaluated": int(arr.shape[0]),
        "skipped": skipped,
        "min_gap_over_error": float(np.min(gap / est)) if gap.size else None,
        "min_relative_gap": float(np.min(rel)) if rel.size else None,
        "positivity_violations": int(negative.sum()),
        "rigidity_violations": int(rigid_bad.sum()),
        "min_oscillation_with_small_gap": float(np.min(osc[rel < 1e-6])) if np.any(rel < 1e-6) else None,
        "max_relative_gap_near_sphere": float(np.max(np.abs(rel[osc < 1e-4]))) if np.any(osc < 1e-4) else None,
    }
