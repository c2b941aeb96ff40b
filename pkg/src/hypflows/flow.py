"""Explicit time integration of the two locally constrained flows.

Both flows move a starshaped radial graph with normal speed F, which for the
radius reads dr/dt = F v.

* ``MCFLaw``: F = -(fbar H / v + n/(n-1) fbar'), fbar a RadialProfile.
* ``ICFLaw``: F = E_{k-2} / E_{k-1} - u / cosh(r), 2 <= k <= n.

Stepping is classical RK4 with a parabolic step bound and reject-and-halve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.integrate import solve_ivp

from . import functionals as fn
from .geometry import R_MAX, GeometryData, GeometryError, GraphHypersurface, graph_geometry
from .profiles import RadialProfile, WeightProfile
from .sphere import GridMode, divergence
from .symmetric import elementary_all, elementary_gradient

COLUMNS = ("t", "dt", "area", "int_f_pow", "W0", "int_Ek1_g", "max_grad_sq",
           "r_min", "r_max", "minkowski_resid", "lhs", "rhs", "gap")
MAX_HALVINGS = 40


class FlowError(RuntimeError):
    pass


class ConeViolation(FlowError):
    pass


class StepRejected(FlowError):
    pass


class InvariantViolation(FlowError):
    pass


@dataclass(frozen=True)
class MCFLaw:
    profile: RadialProfile
    tag: str = field(default="mcf", init=False)

    @property
    def k(self) -> int:
        return 1


@dataclass(frozen=True)
class ICFLaw:
    k: int
    weight: Optional[WeightProfile] = None
    tag: str = field(default="icf", init=False)


Law = Union[MCFLaw, ICFLaw]


def default_icf_weight(n: int, k: int) -> WeightProfile:
    """gtilde(lambda') = lambda', which satisfies lambda' gtilde' >= gtilde."""
    return WeightProfile.from_g_expression("lp", n, k)


def _check_law(law: Law, n: int):
    if isinstance(law, ICFLaw):
        if not 2 <= law.k <= n:
            raise FlowError(f"inverse curvature flow needs 2 <= k <= n, got k={law.k}, n={n}")
    elif isinstance(law, MCFLaw):
        if n < 2:
            raise FlowError("mean curvature flow needs n >= 2")
        if law.profile.n != n:
            raise FlowError(f"profile built for n={law.profile.n}, grid has n={n}")
    else:
        raise FlowError(f"unknown flow law {law!r}")


@dataclass(frozen=True, eq=False)
class FlowState:
    t: float
    surface: GraphHypersurface
    geometry: GeometryData
    law: Law

    @classmethod
    def initial(cls, surface: GraphHypersurface, law: Law, t: float = 0.0) -> "FlowState":
        _check_law(law, surface.grid.n)
        try:
            geo = graph_geometry(surface)
        except GeometryError as exc:
            raise InvariantViolation(f"initial data: {exc}") from exc
        state = cls(t, surface, geo, law)
        problem = invariant_problem(state)
        if problem:
            raise InvariantViolation(f"initial data: {problem}")
        return state

    @property
    def r(self) -> np.ndarray:
        return self.surface.r


def invariant_problem(state: FlowState) -> Optional[str]:
    """Describe the first broken state invariant, or None."""
    geo = state.geometry
    if not np.all(geo.u > 0):
        return "starshapedness lost (u <= 0)"
    if isinstance(state.law, ICFLaw):
        E = elementary_all(geo.kappa)[:, 1:state.law.k + 1]
        if not np.all(E > 0):
            node = int(np.argmin(E.min(axis=1)))
            return (f"cone violation: kappa={geo.kappa[node].tolist()} not in "
                    f"Gamma_{state.law.k}^+ at node {node}")
    return None


def _velocity(geo: GeometryData, law: Law) -> np.ndarray:
    n = geo.n
    if isinstance(law, MCFLaw):
        p = law.profile
        return -(p.f(geo.r) * geo.H / geo.v + n / (n - 1) * p.df(geo.r))
    E = elementary_all(geo.kappa)
    Ek1 = E[:, law.k - 1]
    if not np.all(Ek1 > 0):
        node = int(np.argmin(Ek1))
        raise ConeViolation(f"cone violation: E_{law.k - 1} <= 0 at node {node}, "
                            f"kappa={geo.kappa[node].tolist()}")
    return E[:, law.k - 2] / Ek1 - geo.u / geo.dlam


def flow_velocity(state: FlowState) -> np.ndarray:
    """Nodal normal speed F of the state's flow law."""
    return _velocity(state.geometry, state.law)


def mcf_rhs_forms(geo: GeometryData, profile: RadialProfile) -> dict:
    """dr/dt of the mean curvature flow from three algebraically equal forms.

    ``r_form``: -fbar H - c fbar' v.  ``phi_form``: lambda times the phi
    equation with d fbar / d phi = lambda fbar'.  ``divergence_form``: lambda
    times div(fbar Dphi / (lambda^2 v)) plus lower order terms; its
    discretisation differs from the other two at O(h^2).
    """
    n = geo.n
    c = n / (n - 1)
    f, fr = profile.f(geo.r), profile.df(geo.r)
    lam, dlam, v = geo.lam, geo.dlam, geo.v
    f_phi = lam * fr
    r_form = -f * geo.H - c * fr * v
    phi_t = -f * geo.H / lam - c * f_phi * v / lam**2
    a = f / (lam**2 * v)
    div = divergence(a[:, None] * geo.dphi, geo.grid)
    phi_t_div = (div + geo.grad_sq / (lam**2 * v) * (2 * f * dlam - f_phi)
                 - n * f * dlam / (lam**2 * v) - c * f_phi * v / lam**2)
    return {"r_form": r_form, "phi_form": lam * phi_t, "divergence_form": lam * phi_t_div}


def stable_dt(state: FlowState, c_cfl: float = 0.2) -> float:
    """Parabolic step bound c_cfl h^2 / (n D) with D the largest diffusion coefficient.

    MCF uses D = max(n fbar, 1) / (n min lambda^2).  ICF linearises F in the
    principal curvatures: D = max_i |dF/dkappa_i| / lambda^2.
    """
    geo = state.geometry
    h = geo.grid.h
    if not math.isfinite(h):
        return math.inf
    n = geo.n
    if isinstance(state.law, MCFLaw):
        fmax = float(np.max(state.law.profile.f(geo.r)))
        return c_cfl * h**2 * float(np.min(geo.lam**2)) / max(n * fmax, 1.0)
    k = state.law.k
    E = elementary_all(geo.kappa)
    Ek1, Ek2 = E[:, k - 1], E[:, k - 2]
    dEk2 = elementary_gradient(geo.kappa, k - 2) if k > 2 else np.zeros_like(geo.kappa)
    dEk1 = elementary_gradient(geo.kappa, k - 1)
    dF = (dEk2 * Ek1[:, None] - Ek2[:, None] * dEk1) / (Ek1**2)[:, None]
    D = float(np.max(np.max(np.abs(dF), axis=1) / geo.lam**2))
    if D <= 0:
        return math.inf
    return c_cfl * h**2 / (n * D)


def _rate(r, grid, law):
    geo = graph_geometry(GraphHypersurface(grid, r))
    return _velocity(geo, law) * geo.v


def advance(state: FlowState, dt: float) -> FlowState:
    """One classical RK4 step of dr/dt = F v.

    Raises StepRejected when dt exceeds the hard stability limit (c_cfl = 1),
    when an intermediate stage leaves the admissible set, or when the new
    state breaks an invariant.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    limit = stable_dt(state, 1.0)
    if dt > limit:
        raise StepRejected(f"dt={dt:.3g} exceeds the stability limit {limit:.3g}")
    grid, law, r = state.surface.grid, state.law, state.r
    try:
        k1 = flow_velocity(state) * state.geometry.v
        k2 = _rate(r + 0.5 * dt * k1, grid, law)
        k3 = _rate(r + 0.5 * dt * k2, grid, law)
        k4 = _rate(r + dt * k3, grid, law)
        r_new = r + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        surface = GraphHypersurface(grid, r_new)
        geo = graph_geometry(surface)
    except (GeometryError, ConeViolation, FloatingPointError) as exc:
        raise StepRejected(str(exc)) from exc
    new = FlowState(state.t + dt, surface, geo, law)
    problem = invariant_problem(new)
    if problem:
        raise StepRejected(problem)
    return new


@dataclass
class TimeSeries:
    """Recorded rows, one per recorded accepted step (plus t = 0)."""

    rows: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def append(self, row: dict, extra: Optional[dict] = None):
        if self.rows and not row["t"] > self.rows[-1]["t"]:
            raise FlowError("time series must have strictly increasing t")
        self.rows.append({c: float(row[c]) for c in COLUMNS})
        for key, val in (extra or {}).items():
            self.extras.setdefault(key, []).append(val)

    def column(self, name: str) -> np.ndarray:
        if name in COLUMNS:
            return np.array([row[name] for row in self.rows], dtype=float)
        return np.array(self.extras.get(name, []), dtype=float)

    def as_columns(self) -> dict:
        return {c: self.column(c) for c in COLUMNS}

    def __len__(self):
        return len(self.rows)


def record_row(state: FlowState, dt: float) -> tuple[dict, dict]:
    geo, law = state.geometry, state.law
    n = geo.n
    nan = float("nan")
    F = flow_velocity(state)
    extra = {"max_speed": float(np.max(np.abs(F)))}
    if isinstance(law, MCFLaw):
        f = law.profile.f(geo.r)
        int_f_pow = fn.weighted_power_integral(geo, f)
        int_g = int_f_pow
        m = 1
        report = fn.michael_simon_report(geo, 1, law.profile)
        extra["rate_stated"] = fn.fpow_rate_stated(geo, law.profile)
        extra["rate_geometric"] = fn.fpow_rate_geometric(geo, law.profile, F)
    else:
        k = law.k
        weight = law.weight or default_icf_weight(n, k)
        E = elementary_all(geo.kappa)
        int_g = geo.integrate(E[:, k - 1] * weight.g(geo.dlam))
        m = k
        if weight.f is not None:
            f, _ = fn.weight_on_surface(geo, weight)
            int_f_pow = fn.weighted_power_integral(geo, f)
        else:
            int_f_pow = nan
        report = fn.michael_simon_report(geo, k, weight) if k < n else None
        extra["rate_W0"] = fn.evolution_rates(geo, F)["W0"]
        extra["min_Ek"] = float(np.min(E[:, k]))
    row = {
        "t": state.t,
        "dt": dt,
        "area": geo.area,
        "int_f_pow": int_f_pow,
        "W0": fn.weighted_volume(geo),
        "int_Ek1_g": int_g,
        "max_grad_sq": float(np.max(geo.grad_sq)),
        "r_min": float(np.min(geo.r)),
        "r_max": float(np.max(geo.r)),
        "minkowski_resid": fn.curvature_integrals(geo, m)["minkowski_residual"],
        "lhs": report.lhs if report else nan,
        "rhs": report.rhs if report else nan,
        "gap": report.gap if report else nan,
    }
    return row, extra


@dataclass
class FlowConfig:
    initial: GraphHypersurface
    law: Law
    t_max: float = 20.0
    grad_tol: float = 1e-8
    speed_tol: Optional[float] = None
    c_cfl: float = 0.2
    record_every: int = 1
    dt_max: float = 0.05
    dt_fixed: Optional[float] = None
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not self.t_max > 0:
            raise FlowError("t_max must be positive")
        if not 0 < self.c_cfl <= 1:
            raise FlowError("c_cfl must lie in (0, 1]")
        if self.record_every < 1:
            raise FlowError("record_every must be >= 1")
        if not self.grad_tol > 0:
            raise FlowError("grad_tol must be positive")


@dataclass
class FlowResult:
    final: FlowState
    series: TimeSeries
    summary: dict


def _converged(state: FlowState, grad_tol: float, speed_tol: float) -> bool:
    geo = state.geometry
    grad = math.sqrt(float(np.max(geo.grad_sq)))
    return grad < grad_tol and float(np.max(np.abs(flow_velocity(state)))) < speed_tol


def run_flow(config: FlowConfig) -> FlowResult:
    """Integrate until max|Dphi| and max|F| drop below tolerance or t >= t_max."""
    state = FlowState.initial(config.initial, config.law)
    speed_tol = config.grad_tol if config.speed_tol is None else config.speed_tol
    series = TimeSeries()
    row, extra = record_row(state, 0.0)
    series.append(row, extra)

    law = config.law
    r_lo, r_hi = float(np.min(state.r)), float(np.max(state.r))
    if isinstance(law, MCFLaw):
        r0 = law.profile.zero()
        r_lo, r_hi = min(r_lo, r0), max(r_hi, r0)
    else:
        r0 = None
    grad_cap = max(float(np.max(state.geometry.grad_sq)), 1.0)
    barrier_excess = 0.0
    grad_bound_ok = True
    steps = rejections = 0
    recorded_at = 0
    converged = _converged(state, config.grad_tol, speed_tol)
    dt = 0.0

    while not converged and state.t < config.t_max and steps < config.max_steps:
        dt = config.dt_fixed or min(stable_dt(state, config.c_cfl), config.dt_max)
        dt = min(dt, config.t_max - state.t)
        for _ in range(MAX_HALVINGS + 1):
            try:
                new = advance(state, dt)
                break
            except StepRejected as exc:
                last = exc
                rejections += 1
                dt *= 0.5
        else:
            raise InvariantViolation(f"step failed after {MAX_HALVINGS} halvings at t={state.t:.6g}: {last}")
        state = new
        steps += 1
        geo = state.geometry
        barrier_excess = max(barrier_excess, r_lo - float(np.min(geo.r)), float(np.max(geo.r)) - r_hi)
        if float(np.max(geo.grad_sq)) > grad_cap:
            grad_bound_ok = False
        converged = _converged(state, config.grad_tol, speed_tol)
        if steps % config.record_every == 0 or converged:
            row, extra = record_row(state, dt)
            series.append(row, extra)
            recorded_at = steps
    if steps and recorded_at != steps:
        row, extra = record_row(state, dt)
        series.append(row, extra)

    r = state.r
    summary = {
        "law": law.tag,
        "k": law.k,
        "steps": steps,
        "rejections": rejections,
        "t_final": state.t,
        "converged": bool(converged),
        "r_final_min": float(np.min(r)),
        "r_final_max": float(np.max(r)),
        "r_final_mean": float(np.mean(r)),
        "oscillation": float(np.max(r) - np.min(r)),
        "r_star": r0,
        "max_abs_r_minus_r_star": float(np.max(np.abs(r - r0))) if r0 is not None else None,
        "decay_rate": fn.fit_decay_rate(series.column("t"), series.column("max_grad_sq")),
        "barrier_excess": barrier_excess,
        "barrier_ok": barrier_excess <= 1e-6 if r0 is not None else None,
        "gradient_bound_ok": grad_bound_ok,
        "invariants_ok": True,
    }
    return FlowResult(state, series, summary)


def radial_reduction_run(law: Law, r0: float, t_max: float, t_eval=None, rtol: float = 1e-12,
                         atol: float = 1e-12):
    """Oracle trajectory for spheres: dr/dt = -sinh(r) fhat(r) (MCF), 0 (ICF).

    Returns the scipy OdeResult with dense output.
    """
    if not r0 > 0:
        raise FlowError("r0 must be positive")
    if isinstance(law, ICFLaw):
        rhs = lambda t, y: np.zeros_like(y)
    else:
        rhs = lambda t, y: -np.sinh(y) * law.profile.fhat(y)

    def leave_low(t, y):
        return y[0]

    def leave_high(t, y):
        return R_MAX - y[0]

    leave_low.terminal = leave_high.terminal = True
    sol = solve_ivp(rhs, (0.0, t_max), [float(r0)], method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True, t_eval=t_eval, events=(leave_low, leave_high))
    if sol.status == 1:
        raise FlowError(f"radius left (0, {R_MAX}) at t={sol.t[-1]:.6g}")
    if not sol.success:
        raise FlowError(sol.message)
    return sol
