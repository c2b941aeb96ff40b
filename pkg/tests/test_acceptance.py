"""Acceptance criteria, one test (or pair of tests) per criterion.

Each test records its outcome with the ``criterion`` fixture; the terminal
summary prints one PASS/FAIL line per criterion.  Criterion 5b is a known
failure of the stated rate formula and is marked xfail(strict=True).
"""

import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from hypflows.flow import FlowConfig, FlowState, ICFLaw, MCFLaw, advance, flow_velocity, radial_reduction_run, run_flow
from hypflows.functionals import (curvature_integrals, fpow_rate_geometric, fpow_rate_stated, h0,
                                  h0_inverse, michael_simon_report, monotonicity_audit, random_perturbation_study,
                                  weighted_power_integral, weighted_volume)
from hypflows.geometry import GraphHypersurface, geometry_identity_residuals, graph_geometry
from hypflows.profiles import profile_from_fhat
from hypflows.sphere import build_grid, sphere_area
from hypflows.symmetric import elementary_derivative_checks, in_garding_cone, maclaurin_gap

PROFILE = profile_from_fhat("r-1", 2, (0.5, 3.0))


@pytest.fixture(scope="module")
def run4():
    g = build_grid("axisymmetric", 2, 32)
    surf = GraphHypersurface(g, 1.2 + 0.1 * np.cos(2 * g.theta))
    return run_flow(FlowConfig(surf, MCFLaw(PROFILE), t_max=20.0))


# ---------------------------------------------------------------- 1

def test_criterion_1_sphere_geometry(criterion):
    worst = 0.0
    for n in (2, 3):
        g = build_grid("radial", n)
        for r in (0.5, 1.0, 2.0):
            geo = graph_geometry(GraphHypersurface.sphere(g, r))
            refs = [(geo.u[0], math.sinh(r)), (geo.H[0], n / math.tanh(r)),
                    (geo.area, sphere_area(n) * math.sinh(r) ** n)]
            refs += [(k, 1 / math.tanh(r)) for k in geo.kappa[0]]
            worst = max(worst, max(abs(a - b) / abs(b) for a, b in refs))
    criterion(1, worst < 1e-10, f"max relative error {worst:.2e}")
    assert worst < 1e-10


# ---------------------------------------------------------------- 2

def test_criterion_2_identities(criterion):
    hess, mink = [], []
    for N in (64, 128, 256):
        g = build_grid("axisymmetric", 2, N)
        geo = graph_geometry(GraphHypersurface(g, 1 + 0.1 * np.cos(g.theta)))
        hess.append(geometry_identity_residuals(geo)["hessian"])
        mink.append(max(abs(curvature_integrals(geo, m)["minkowski_residual"]) for m in (1, 2)))
    order_h = np.log2(np.array(hess[:-1]) / np.array(hess[1:]))
    order_m = np.log2(np.array(mink[:-1]) / np.array(mink[1:]))

    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 6))
        B = rng.normal(size=(n, n))
        A = 0.5 * (B + B.T)
        for l in range(1, n + 1):
            _, res = elementary_derivative_checks(A, l)
            worst = max(worst, max(float(np.max(v)) for v in res.values()))
    ok = bool(np.all(order_h >= 1.9) and np.all(order_m >= 1.9) and worst < 1e-10)
    criterion(2, ok, f"hessian orders {np.round(order_h, 2).tolist()}, minkowski orders "
                     f"{np.round(order_m, 2).tolist()}, matrix identity residual {worst:.1e}")
    assert ok


# ---------------------------------------------------------------- 3

def test_criterion_3_newton_maclaurin(criterion):
    rng = np.random.default_rng(3)
    min_gap, mismatches, count = math.inf, 0, 0
    while count < 10_000:
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, n))
        l = int(rng.integers(1, m + 1))
        if count % 20 == 0:
            kappa = np.full(n, rng.uniform(0.1, 3.0))
        else:
            kappa = rng.uniform(0.1, 3.0) + rng.normal(scale=rng.uniform(0.05, 2.0), size=n)
        if not in_garding_cone(kappa, m):
            continue
        count += 1
        gap = float(maclaurin_gap(kappa, l, m))
        min_gap = min(min_gap, gap)
        constant = np.ptp(kappa) <= 1e-12 * max(1.0, np.max(np.abs(kappa)))
        if (abs(gap) < 1e-12) != constant:
            mismatches += 1
    ok = min_gap >= -1e-12 and mismatches == 0
    criterion(3, ok, f"min gap {min_gap:.2e} over {count} samples, {mismatches} rigidity mismatches")
    assert ok


# ---------------------------------------------------------------- 4

def test_criterion_4_mcf_convergence(run4, criterion):
    s = run4.summary
    err = s["max_abs_r_minus_r_star"]
    ok = (s["converged"] or s["t_final"] >= 20.0) and err < 1e-4 and s["decay_rate"] < 0 \
        and s["barrier_excess"] <= 1e-6
    criterion(4, ok, f"|r-1| = {err:.1e} at t = {s['t_final']:.2f}, decay slope {s['decay_rate']:.3f}, "
                     f"barrier excess {s['barrier_excess']:.1e}")
    assert ok


# ---------------------------------------------------------------- 5

def test_criterion_5a_monotone(run4, criterion):
    audit = monotonicity_audit(run4.series.as_columns(), "mcf", slack=1e-8)
    chk = audit["checks"]["int_f_pow_nonincreasing"]
    criterion("5a", chk["pass"], f"int f^(n/(n-1)) nonincreasing over {len(run4.series)} steps")
    assert chk["pass"]


def rate_errors(t_end=0.05):
    """Discrete d/dt of int f^{n/(n-1)} against the two analytic rates, halving dt and h together."""
    out = {"stated": [], "geometric": []}
    for N, dt in ((16, 1e-3), (32, 5e-4), (64, 2.5e-4)):
        g = build_grid("axisymmetric", 2, N)
        state = FlowState.initial(GraphHypersurface(g, 1.2 + 0.1 * np.cos(2 * g.theta)), MCFLaw(PROFILE))
        ts, vals, stated, geometric = [], [], [], []
        for _ in range(int(round(t_end / dt)) + 1):
            geo = state.geometry
            ts.append(state.t)
            vals.append(weighted_power_integral(geo, PROFILE.f(geo.r)))
            stated.append(fpow_rate_stated(geo, PROFILE))
            geometric.append(fpow_rate_geometric(geo, PROFILE, flow_velocity(state)))
            state = advance(state, dt)
        deriv = np.gradient(np.array(vals), np.array(ts), edge_order=2)
        out["stated"].append(float(np.max(np.abs(deriv - np.array(stated)))))
        out["geometric"].append(float(np.max(np.abs(deriv - np.array(geometric)))))
    return out


@pytest.fixture(scope="module")
def rates():
    return rate_errors()


def test_criterion_5_geometric_rate_converges(rates):
    # supporting check: the exact first variation does converge at second order
    e = np.array(rates["geometric"])
    assert np.all(np.log2(e[:-1] / e[1:]) > 1.8)


@pytest.mark.xfail(strict=True, reason="stated rate uses dG/dnu = G' v instead of G'/v; its error stalls")
def test_criterion_5b_stated_rate(rates, criterion):
    e = rates["stated"]
    ok = e[2] < e[1] < e[0]
    criterion("5b", ok, f"stated-rate errors {[f'{x:.2e}' for x in e]} (geometric "
                        f"{[f'{x:.2e}' for x in rates['geometric']]})")
    assert ok


# ---------------------------------------------------------------- 6

def test_criterion_6_radial_oracle(criterion):
    law = MCFLaw(PROFILE)
    worst = 0.0
    grids = (build_grid("axisymmetric", 2, 16), build_grid("full2d", 2, (8, 8)))
    for g in grids:
        for r0 in (1.5, 0.7):
            res = run_flow(FlowConfig(GraphHypersurface.sphere(g, r0), law, t_max=10.0, record_every=5,
                                      grad_tol=1e-30, speed_tol=0.0))
            cols = res.series.as_columns()
            ref = radial_reduction_run(law, r0, 10.0).sol(np.asarray(cols["t"]))[0]
            worst = max(worst, float(np.max(np.abs(cols["r_max"] - ref))), float(np.max(np.abs(cols["r_min"] - ref))))
    # linearised decay near r0 = 1: r - 1 ~ exp(-sinh(1) t)
    res = run_flow(FlowConfig(GraphHypersurface.sphere(grids[0], 1.01), law, t_max=10.0, record_every=5,
                              grad_tol=1e-30, speed_tol=0.0))
    t = res.series.column("t")
    dev = res.series.column("r_max") - 1.0
    keep = t >= 2.0
    rate = -np.polyfit(t[keep], np.log(dev[keep]), 1)[0]
    rel = abs(rate - math.sinh(1.0)) / math.sinh(1.0)
    ok = worst < 1e-6 and rel < 0.02
    criterion(6, ok, f"max deviation from radial ODE {worst:.1e}, decay rate {rate:.4f} ({100 * rel:.2f}% off)")
    assert ok


# ---------------------------------------------------------------- 7

def test_criterion_7_icf(criterion):
    g = build_grid("axisymmetric", 2, 32)
    surf = GraphHypersurface(g, 1.0 + 0.05 * np.cos(2 * g.theta))
    res = run_flow(FlowConfig(surf, ICFLaw(2), t_max=20.0))
    s = res.series
    W0 = s.column("W0")
    w0_ok = bool(np.all(W0[1:] - W0[:-1] >= -1e-8 * np.abs(W0[:-1])))
    cone_ok = bool(np.all(np.array(s.extras["min_Ek"]) > 0)) and s.column("r_min").min() > 0
    fixed = 0.0
    for n, k in ((2, 2), (3, 2), (3, 3), (4, 3)):
        for R in (0.3, 1.0, 2.5):
            st = FlowState.initial(GraphHypersurface.sphere(build_grid("axisymmetric", n, 16), R), ICFLaw(k))
            fixed = max(fixed, float(np.max(np.abs(flow_velocity(st)))))
    osc = res.summary["oscillation"]
    ok = osc < 1e-4 and w0_ok and cone_ok and res.summary["invariants_ok"] and fixed < 1e-13
    criterion(7, ok, f"final oscillation {osc:.1e} at t = {res.summary['t_final']:.2f}, W0 monotone {w0_ok}, "
                     f"cone kept {cone_ok}, sphere |F| {fixed:.1e}")
    assert ok


# ---------------------------------------------------------------- 8

def test_criterion_8_k1_inequality(criterion):
    geo = graph_geometry(GraphHypersurface.sphere(build_grid("axisymmetric", 2, 64), 1.0))
    rep = michael_simon_report(geo, 1, 1.0)
    value = 4 * math.pi * math.sinh(1.0)
    eq = abs(rep.lhs - rep.rhs) / rep.rhs
    study = random_perturbation_study(2, 1, 1.0, np.random.default_rng(8), samples=1000)
    ok = (eq < 1e-8 and abs(rep.lhs - value) < 1e-8 * value and study["positivity_violations"] == 0
          and study["rigidity_violations"] == 0)
    criterion(8, ok, f"sphere relative gap {eq:.1e} (lhs {rep.lhs:.4f}), {study['evaluated']} samples, "
                     f"min gap/error {study['min_gap_over_error']:.2e}, rigidity violations "
                     f"{study['rigidity_violations']}")
    assert ok


# ---------------------------------------------------------------- 9

def test_criterion_9_k2_inequality(criterion):
    geo = graph_geometry(GraphHypersurface.sphere(build_grid("axisymmetric", 3, 32), 1.0))
    rep = michael_simon_report(geo, 2, 1 / math.sinh(1.0), f_const=1 / math.sinh(1.0))
    value = 2 * math.pi**2 * math.cosh(1.0)
    eq = abs(rep.lhs - rep.rhs) / rep.rhs
    w_geo = weighted_volume(graph_geometry(GraphHypersurface.sphere(build_grid("radial", 2), 1.0)))
    w_ref = 4 * math.pi * math.sinh(1.0) ** 3
    round_trip = max(abs(h0_inverse(h0(R, n), n) - R) for n in (2, 3, 4) for R in np.linspace(0.05, 5, 50))
    ok = (eq < 1e-7 and abs(rep.lhs - value) < 1e-7 * value and abs(w_geo - w_ref) < 1e-10 * w_ref
          and abs(h0(1.0, 2) - w_ref) < 1e-12 * w_ref and round_trip < 1e-10)
    criterion(9, ok, f"relative gap {eq:.1e} (lhs {rep.lhs:.3f}), W0(B_1) {w_geo:.3f}, "
                     f"h0 round trip {round_trip:.1e}")
    assert ok


# ---------------------------------------------------------------- 10

DETERMINISM_CONFIGS = {
    "simulate": {"command": "simulate", "grid": {"mode": "axisymmetric", "n": 2, "resolution": 24},
                 "shape": {"radius": 1.2, "harmonics": [[2, 0.1]]}, "law": {"kind": "mcf", "fhat": "r-1"},
                 "run": {"t_max": 0.5}, "output": {"prefix": "sim"}},
    "verify": {"command": "verify", "grid": {"mode": "axisymmetric", "n": 3, "resolution": 32},
               "shape": {"radius": 1.0}, "verify": {"k": 2, "weight": {"kind": "const", "value": 0.85},
                                                    "f_const": "sphere", "samples": 50},
               "output": {"prefix": "ver"}, "seed": 11},
}


def cli_outputs(tmp_path, threads):
    env = dict(os.environ, OMP_NUM_THREADS=str(threads), OPENBLAS_NUM_THREADS=str(threads),
               MKL_NUM_THREADS=str(threads))
    out = {}
    for name, data in DETERMINISM_CONFIGS.items():
        cfg = tmp_path / f"{name}.json"
        cfg.write_text(json.dumps(data))
        d = tmp_path / f"{name}_{threads}"
        d.mkdir()
        subprocess.run([sys.executable, "-m", "hypflows", name, "--config", str(cfg), "--out", str(d), "--quiet"],
                       env=env, check=True)
        for f in sorted(d.iterdir()):
            text = f.read_bytes().replace(str(d).encode(), b"<out>")
            out[f"{name}/{f.name}"] = text
    return out


def test_criterion_10_determinism(tmp_path, criterion):
    one = cli_outputs(tmp_path, 1)
    many = cli_outputs(tmp_path, 4)
    ok = one == many and len(one) == 3
    criterion(10, ok, f"{len(one)} files byte-identical across 1 and 4 threads")
    assert ok
