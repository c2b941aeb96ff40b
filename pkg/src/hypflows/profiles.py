"""Weight functions for the two flows.

``RadialProfile`` carries fbar(r) for the mean-curvature-type flow together
with its constraint function

    fhat(r) = n/(n-1) * fbar'(r) / lambda + n * fbar * lambda' / lambda^2,

which must be increasing with a zero r0 (the limit radius of the flow).
``profile_from_fhat`` goes the other way: given fhat it builds
fbar = lambda^{1-n} h with h' = (n-1)/n lambda^n fhat.

``WeightProfile`` carries gtilde(lambda') (and, when 1 <= k <= n-1, the
companion f = gtilde^{(n-k)/(n-k+1)}) for the inverse-curvature-type flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from .expr import Expression


class ProfileError(ValueError):
    pass


def fd_derivative(func, x, order=1, step=1e-3):
    """Fourth-order central finite difference."""
    x = np.asarray(x, dtype=float)
    hs = step * np.maximum(1.0, np.abs(x))
    f = func
    if order == 1:
        return (f(x - 2 * hs) - 8 * f(x - hs) + 8 * f(x + hs) - f(x + 2 * hs)) / (12 * hs)
    if order == 2:
        return (-f(x - 2 * hs) + 16 * f(x - hs) - 30 * f(x) + 16 * f(x + hs)
                - f(x + 2 * hs)) / (12 * hs**2)
    raise ValueError("order must be 1 or 2")


@dataclass(frozen=True, eq=False)
class RadialProfile:
    n: int
    domain: tuple
    f: Callable
    df: Callable
    d2f: Callable
    descriptor: dict = field(default_factory=dict)
    fhat_closed: Optional[Callable] = None

    def fhat(self, r):
        r = np.asarray(r, dtype=float)
        if self.fhat_closed is not None:
            return self.fhat_closed(r)
        n = self.n
        lam, dlam = np.sinh(r), np.cosh(r)
        return n / (n - 1) * self.df(r) / lam + n * self.f(r) * dlam / lam**2

    def normal_speed_radial(self, r):
        """Normal speed of a geodesic sphere of radius r: -lambda(r) fhat(r)."""
        return -np.sinh(r) * self.fhat(r)

    def zero(self, samples: int = 512) -> float:
        """Zero of fhat inside the domain (bisection on the first sign change)."""
        lo, hi = self.domain
        xs = np.linspace(lo, hi, samples)
        ys = self.fhat(xs)
        idx = np.nonzero(np.sign(ys[:-1]) * np.sign(ys[1:]) <= 0)[0]
        if idx.size == 0:
            raise ProfileError("fhat has no sign change on the profile domain")
        i = int(idx[0])
        if ys[i] == 0:
            return float(xs[i])
        return float(brentq(lambda x: float(self.fhat(x)), xs[i], xs[i + 1], xtol=1e-14))

    @classmethod
    def from_expression(cls, text: str, n: int, domain=(1e-3, 25.0)):
        """fbar given directly; derivatives by fourth-order differences."""
        ex = Expression(text, "r")
        return cls(n, tuple(domain), ex, lambda r: fd_derivative(ex, r, 1),
                   lambda r: fd_derivative(ex, r, 2), {"fbar": text})

    @classmethod
    def power_of_sinh(cls, n: int, p: float):
        """fbar = sinh(r)^p with closed-form derivatives."""
        def f(r):
            return np.sinh(r) ** p

        def df(r):
            return p * np.sinh(r) ** (p - 1) * np.cosh(r)

        def d2f(r):
            s, c = np.sinh(r), np.cosh(r)
            return p * (p - 1) * s ** (p - 2) * c**2 + p * s**p

        return cls(n, (1e-6, 25.0), f, df, d2f, {"fbar": f"pow(sinh(r), {p!r})"})


def _cheb_fit(func, domain, scale=None, degrees=(16, 24, 32, 40, 48, 64, 96, 128)):
    # Interpolation error plateaus and then grows with degree from rounding.
    # Keep the lowest degree within a factor 2 of the best measured error on
    # a check grid (low degree also keeps evaluation cheap inside flows).
    check = np.linspace(domain[0], domain[1], 1537)
    ref = func(check)
    wt = np.ones_like(check) if scale is None else scale(check)
    fits = []
    for deg in degrees:
        c = Chebyshev.interpolate(func, deg, domain=domain)
        fits.append((np.max(np.abs(c(check) - ref) / wt), c))
    best_err = min(err for err, _ in fits)
    return next(c for err, c in fits if err <= 2 * best_err)


def _joint_eval(series_list):
    """Evaluate several Chebyshev series on one domain as cos(k arccos x) @ coef.

    Returns a function of r giving a tuple of values.  The last input is
    cached, since f, f' and f'' are usually requested at the same nodes.
    """
    a, b = series_list[0].domain
    width = max(s.coef.size for s in series_list)
    coef = np.zeros((width, len(series_list)))
    for j, s in enumerate(series_list):
        coef[:s.coef.size, j] = s.coef
    k = np.arange(width)
    cache = {}

    def ev(r):
        r = np.asarray(r, dtype=float)
        key = (r.shape, r.tobytes())
        if key in cache:
            return cache[key]
        x = (2.0 * r - (a + b)) / (b - a)
        if np.all(np.abs(x) <= 1.0):
            vals = np.cos(np.multiply.outer(np.arccos(x), k)) @ coef
            out = tuple(vals[..., j] for j in range(len(series_list)))
        else:
            out = tuple(s(r) for s in series_list)
        cache.clear()
        cache[key] = out
        return out

    return ev


def profile_from_fhat(fhat_spec, n: int, domain, normalization: float = 1.0,
                      anchor: Optional[float] = None) -> RadialProfile:
    """Build fbar from a prescribed fhat.

    fbar = lambda^{1-n} h with h(anchor) = normalization and
    h' = (n-1)/n lambda^n fhat.  ``anchor`` defaults to the lower end of the
    domain.
    """
    lo, hi = (float(x) for x in domain)
    if not hi > lo:
        raise ProfileError(f"empty domain [{lo}, {hi}]")
    if lo <= 0:
        raise ProfileError("profile domain must lie in r > 0")
    descriptor = {"fhat": str(fhat_spec), "normalization": normalization,
                  "domain": [lo, hi]}
    if isinstance(fhat_spec, str):
        fhat_spec = Expression(fhat_spec, "r")
    if anchor is None:
        anchor = lo
    else:
        descriptor["anchor"] = anchor
    c = (n - 1) / n
    hprime = _cheb_fit(lambda r: c * np.sinh(r) ** n * fhat_spec(r), (lo, hi),
                      scale=lambda r: c * np.sinh(r) ** n)
    hvals = _joint_eval([hprime.integ(1, k=[normalization], lbnd=anchor), hprime, hprime.deriv()])

    def hfun(r):
        return hvals(r)[0]

    def hprime(r):
        return hvals(r)[1]

    def hsecond(r):
        return hvals(r)[2]

    probe = np.linspace(lo, hi, 4001)
    hv = hfun(probe)
    if np.any(hv <= 0):
        bad = probe[int(np.argmin(hv))]
        raise ProfileError(f"positivity violated: h(r) <= 0 near r={bad:.6g}")

    def f(r):
        return np.sinh(r) ** (1 - n) * hfun(r)

    def df(r):
        s, co = np.sinh(r), np.cosh(r)
        return (1 - n) * s ** (-n) * co * hfun(r) + s ** (1 - n) * hprime(r)

    def d2f(r):
        s, co = np.sinh(r), np.cosh(r)
        a = s ** (1 - n)
        da = (1 - n) * s ** (-n) * co
        d2a = (1 - n) * (-n * s ** (-n - 1) * co**2 + s ** (1 - n))
        return d2a * hfun(r) + 2 * da * hprime(r) + a * hsecond(r)

    def fhat_closed(r):
        # The lambda'-terms cancel identically: fhat = n/(n-1) lambda^{-n} h'.
        return hprime(r) / (c * np.sinh(r) ** n)

    return RadialProfile(n, (lo, hi), f, df, d2f, descriptor, fhat_closed)


@dataclass(frozen=True, eq=False)
class WeightProfile:
    """gtilde(lambda') and optionally f = gtilde^{(n-k)/(n-k+1)}, both with derivatives."""

    n: int
    k: int
    g: Optional[Callable] = None
    dg: Optional[Callable] = None
    f: Optional[Callable] = None
    df: Optional[Callable] = None
    descriptor: dict = field(default_factory=dict)
    ode_residual: Optional[float] = None

    @property
    def exponent(self) -> Optional[float]:
        """(n-k+1)/(n-k), the power taking f to gtilde; None when k >= n."""
        if self.k >= self.n:
            return None
        return (self.n - self.k + 1) / (self.n - self.k)

    @classmethod
    def constant_f(cls, n, k, value):
        value = float(value)
        f = lambda lp: np.full(np.shape(lp), value) if np.ndim(lp) else value  # noqa: E731
        zero = lambda lp: np.zeros(np.shape(lp)) if np.ndim(lp) else 0.0  # noqa: E731
        return cls._from_f(n, k, f, zero, {"f": repr(value)})

    @classmethod
    def _from_f(cls, n, k, f, df, descriptor):
        if k < n and k >= 1:
            p = (n - k + 1) / (n - k)
            g = lambda lp: f(lp) ** p  # noqa: E731
            dg = lambda lp: p * f(lp) ** (p - 1) * df(lp)  # noqa: E731
        else:
            g = dg = None
        return cls(n, k, g, dg, f, df, descriptor)

    @classmethod
    def _from_g(cls, n, k, g, dg, descriptor, ode_residual=None):
        if k < n and k >= 1:
            q = (n - k) / (n - k + 1)
            f = lambda lp: g(lp) ** q  # noqa: E731
            df = lambda lp: q * g(lp) ** (q - 1) * dg(lp)  # noqa: E731
        else:
            f = df = None
        return cls(n, k, g, dg, f, df, descriptor, ode_residual)

    @classmethod
    def from_f_expression(cls, text, n, k):
        ex = Expression(text, "lp")
        return cls._from_f(n, k, ex, lambda lp: fd_derivative(ex, lp, 1), {"f": text})

    @classmethod
    def from_g_expression(cls, text, n, k):
        ex = Expression(text, "lp")
        return cls._from_g(n, k, ex, lambda lp: fd_derivative(ex, lp, 1), {"g": text})


def verify_assumption_profiles(profile, value_range, samples: int = 256) -> dict:
    """Check the monotonicity/zero-point requirements on a sampled range.

    For a RadialProfile: fhat increasing and changing sign.  For a
    WeightProfile: gtilde / lambda' increasing in lambda' (range in lambda').
    Violations are report entries, never exceptions.
    """
    if samples < 64:
        raise ProfileError("need at least 64 samples")
    lo, hi = (float(x) for x in value_range)
    xs = np.linspace(lo, hi, samples)
    report = {"range": [lo, hi], "samples": samples}
    if isinstance(profile, RadialProfile):
        ys = np.asarray(profile.fhat(xs), dtype=float)
        drops = np.nonzero(np.diff(ys) < -1e-12)[0]
        report["quantity"] = "fhat"
        report["monotone"] = drops.size == 0
        report["first_violation"] = None if drops.size == 0 else float(xs[drops[0]])
        # rounding noise around an identically vanishing fhat is not a sign change
        sign = np.sign(np.where(np.abs(ys) <= 1e-12 * max(1.0, float(np.max(np.abs(ys)))), 0.0, ys))
        change = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
        exact = np.nonzero(sign == 0)[0]
        flags = []
        if change.size:
            i = int(change[0])
            r0 = brentq(lambda x: float(profile.fhat(x)), xs[i], xs[i + 1], xtol=1e-12)
            report["zero_bracketed"] = True
            report["zero"] = float(r0)
        elif exact.size and exact.size < ys.size:
            report["zero_bracketed"] = True
            report["zero"] = float(xs[exact[0]])
        else:
            report["zero_bracketed"] = False
            report["zero"] = None
            flags.append("zero-point condition not strictly met")
        if not report["monotone"]:
            flags.append("fhat not monotonically increasing")
        report["flags"] = flags
        return report

    if profile.g is None:
        raise ProfileError("weight profile has no gtilde (k >= n with f given)")
    ys = np.asarray(profile.g(xs), dtype=float) / xs
    drops = np.nonzero(np.diff(ys) < -1e-12)[0]
    report["quantity"] = "gtilde/lambda'"
    report["monotone"] = drops.size == 0
    report["first_violation"] = None if drops.size == 0 else float(xs[drops[0]])
    report["positive"] = bool(np.all(np.asarray(profile.g(xs)) > 0))
    report["flags"] = [] if report["monotone"] else ["gtilde/lambda' not monotonically increasing"]
    return report


def _solve_two_point(s, n, k, ga, gb, homogeneous):
    M = s.size
    h = s[1] - s[0]
    si = s[1:-1]
    beta = np.zeros_like(si) if homogeneous else 1.0 / ((k - 1) * np.tanh(si))
    lower = 1.0 / (n * h**2) + beta / (2 * h)
    diag = -2.0 / (n * h**2) - 1.0 + 0 * si
    upper = 1.0 / (n * h**2) - beta / (2 * h)
    rhs = np.zeros(M - 2)
    rhs[0] -= lower[0] * ga
    rhs[-1] -= upper[-1] * gb
    ab = np.zeros((3, M - 2))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    inner = solve_banded((1, 1), ab, rhs)
    return np.concatenate(([ga], inner, [gb]))


def ode_residual(s, gvals, n, k, homogeneous=False, stride=1):
    """Plug-in residual of (1/n) g'' - g - lambda'/(k-1) * (g'/lambda), interior nodes.

    Derivatives by fourth-order central stencils on every ``stride``-th node of
    the tabulated solution (a wider stencil keeps rounding below 1e-9).
    """
    s, gvals = s[::stride], gvals[::stride]
    h = s[1] - s[0]
    gm2, gm1, g0, gp1, gp2 = (gvals[i:gvals.size - 4 + i] for i in range(5))
    d1 = (gm2 - 8 * gm1 + 8 * gp1 - gp2) / (12 * h)
    d2 = (-gm2 + 16 * gm1 - 30 * g0 + 16 * gp1 - gp2) / (12 * h**2)
    si = s[2:-2]
    rhs = 0.0 if homogeneous else np.cosh(si) / (k - 1) * d1 / np.sinh(si)
    return d2 / n - g0 - rhs


def weight_from_ode(k: int, n: int, boundary_data, s_domain, points: int = 1001,
                    homogeneous: bool = False) -> WeightProfile:
    """Tabulate g(s) solving (1/n) g'' - g = lambda'(s)/(k-1) * dgtilde/dlambda'.

    The equation is read as an ODE in an arc parameter s with lambda'(s) = cosh s
    and gtilde(lambda'(s)) = g(s), so dgtilde/dlambda' = g'(s) / sinh(s).
    Second-order finite differences on two grids, Richardson-extrapolated.
    ``homogeneous=True`` drops the right-hand side.
    """
    if k == 1:
        raise ProfileError("degenerate coefficient: k = 1 divides by k - 1")
    if k < 1:
        raise ProfileError(f"k must be >= 2, got {k}")
    a, b = (float(x) for x in s_domain)
    if a <= 0 or b <= a:
        raise ProfileError("s_domain must be an interval inside (0, inf): lambda(s) = 0 is singular")
    ga, gb = (float(x) for x in boundary_data)
    coarse = np.linspace(a, b, points)
    fine = np.linspace(a, b, 2 * points - 1)
    gc = _solve_two_point(coarse, n, k, ga, gb, homogeneous)
    gf = _solve_two_point(fine, n, k, ga, gb, homogeneous)
    gvals = (4.0 * gf[::2] - gc) / 3.0
    res = float(np.max(np.abs(ode_residual(coarse, gvals, n, k, homogeneous))))
    spline = CubicSpline(coarse, gvals)
    dspline = spline.derivative()

    def g(lp):
        return spline(np.arccosh(np.asarray(lp, dtype=float)))

    def dg(lp):
        s = np.arccosh(np.asarray(lp, dtype=float))
        return dspline(s) / np.sinh(s)

    desc = {"ode": {"k": k, "n": n, "boundary": [ga, gb], "s_domain": [a, b],
                    "points": points, "homogeneous": homogeneous}}
    prof = WeightProfile._from_g(n, k, g, dg, desc, res)
    object.__setattr__(prof, "table", (coarse, gvals))
    return prof


def lambda_prime_range(s_domain):
    return tuple(math.cosh(x) for x in s_domain)
