import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hypflows.sphere import (GridError, GridMode, build_grid, differentiate, divergence, integrate,
                             laplacian, sphere_area)


def observed_order(errors):
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])


def test_axisymmetric_grid_example():
    g = build_grid("axisymmetric", 2, 64)
    assert g.size == 64
    assert math.isclose(g.weights.sum(), 12.5663706, rel_tol=1e-8)
    assert np.all(g.theta > 0) and np.all(g.theta < math.pi)


def test_full2d_node_count():
    assert build_grid("full2d", 2, (64, 128)).size == 8192


def test_radial_grid_has_one_node():
    g = build_grid("radial", 3)
    assert g.size == 1 and g.mode is GridMode.RADIAL


@pytest.mark.parametrize("args", [("full2d", 3, 16), ("axisymmetric", 2, 4), ("full2d", 2, (16, 6)),
                                  ("axisymmetric", 1, 16), ("full2d", 2, (16, 33))])
def test_build_grid_rejects(args):
    with pytest.raises(GridError):
        build_grid(*args)


def test_full2d_error_says_unsupported():
    with pytest.raises(GridError, match="unsupported"):
        build_grid("full2d", 3, 16)


@pytest.mark.parametrize("mode,n,res", [("axisymmetric", 2, 8), ("axisymmetric", 3, 33),
                                        ("axisymmetric", 5, 64), ("full2d", 2, (8, 16)),
                                        ("full2d", 2, (40, 64)), ("radial", 4, None)])
def test_weights_positive_and_exact(mode, n, res):
    g = build_grid(mode, n, res)
    assert np.all(g.weights > 0)
    assert abs(integrate(np.ones(g.size), g) / sphere_area(n) - 1) < 1e-10


def test_integrate_examples():
    g = build_grid("axisymmetric", 2, 64)
    assert abs(integrate(np.cos(g.theta) ** 2, g) - 4 * math.pi / 3) < 1e-8
    assert abs(integrate(np.cos(g.theta), g)) < 1e-12


def test_integrate_rejects_non_finite_and_mismatch():
    g = build_grid("axisymmetric", 2, 16)
    bad = np.ones(16)
    bad[3] = np.nan
    with pytest.raises(GridError):
        integrate(bad, g)
    with pytest.raises(GridError):
        integrate(np.ones(15), g)


def test_constant_field_derivatives_vanish():
    for g in (build_grid("axisymmetric", 3, 16), build_grid("full2d", 2, 16), build_grid("radial", 2)):
        grad, hess = differentiate(np.full(g.size, 2.5), g)
        assert np.all(grad == 0) and np.all(hess == 0)


def test_cos_theta_laplacian_and_gradient_second_order():
    lap_err, grad_err = [], []
    for N in (32, 64, 128):
        g = build_grid("axisymmetric", 2, N)
        grad, hess = differentiate(np.cos(g.theta), g)
        lap_err.append(np.max(np.abs(np.trace(hess, axis1=1, axis2=2) + 2 * np.cos(g.theta))))
        grad_err.append(np.max(np.abs(np.sum(grad**2, axis=1) - np.sin(g.theta) ** 2)))
    assert np.all(observed_order(lap_err) > 1.9)
    assert np.all(observed_order(grad_err) > 1.9)


def test_hessian_symmetric_full2d():
    g = build_grid("full2d", 2, (16, 32))
    f = g.sample(lambda t, p: np.sin(t) * np.cos(p) + np.cos(t) ** 2)
    _, hess = differentiate(f, g)
    assert np.array_equal(hess, np.swapaxes(hess, 1, 2))


def test_full2d_laplacian_of_spherical_harmonic_converges():
    # x = sin(theta) cos(psi) is a degree-one eigenfunction: Delta x = -2 x
    errs = []
    for N in (16, 32, 64):
        g = build_grid("full2d", 2, N)
        x = g.sample(lambda t, p: np.sin(t) * np.cos(p))
        errs.append(np.max(np.abs(laplacian(x, g) + 2 * x)))
    assert errs[2] < errs[1] < errs[0]


def test_axisymmetric_higher_dimension_eigenfunction():
    # cos(theta) on S^n has eigenvalue -n
    g = build_grid("axisymmetric", 4, 256)
    err = np.max(np.abs(laplacian(np.cos(g.theta), g) + 4 * np.cos(g.theta)))
    assert err < 1e-3


def test_divergence_of_gradient_matches_laplacian():
    errs = []
    for N in (32, 64, 128):
        g = build_grid("axisymmetric", 3, N)
        f = np.cos(g.theta) + 0.3 * np.cos(2 * g.theta)
        grad, _ = differentiate(f, g)
        errs.append(np.max(np.abs(divergence(grad, g) - laplacian(f, g))))
    assert np.all(observed_order(errs) > 1.8)


@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2**32 - 1))
def test_differentiate_is_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    g = build_grid("full2d", 2, 8)
    u, v = rng.normal(size=(2, g.size))
    gu, hu = differentiate(u, g)
    gv, hv = differentiate(v, g)
    gw, hw = differentiate(a * u + b * v, g)
    scale = 1 + abs(a) + abs(b)
    assert np.allclose(gw, a * gu + b * gv, atol=1e-12 * scale * np.abs(gu).max() + 1e-300)
    assert np.allclose(hw, a * hu + b * hv, atol=1e-12 * scale * np.abs(hu).max() + 1e-300)
