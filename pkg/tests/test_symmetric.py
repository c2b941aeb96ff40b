import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from hypflows.symmetric import (cone_and_maclaurin, elementary_all, elementary_derivative,
                                elementary_derivative_checks, elementary_gradient, in_garding_cone,
                                maclaurin_gap, normalized_elementary)


def enumerate_E(kappa, l):
    n = len(kappa)
    if l == 0:
        return 1.0
    if l > n:
        return 0.0
    total = math.fsum(math.prod(c) for c in itertools.combinations(kappa, l))
    return total / math.comb(n, l)


kappas = st.integers(1, 6).flatmap(
    lambda n: arrays(float, n, elements=st.floats(-5, 5, allow_subnormal=False)))


def test_examples():
    assert normalized_elementary([1, 1, 1], 2) == 1.0
    assert math.isclose(normalized_elementary([1, 2, 3], 2), 11 / 3, rel_tol=1e-15)
    assert normalized_elementary([1, 2, 3], 4) == 0.0
    assert normalized_elementary([1, 2, 3], 0) == 1.0
    with pytest.raises(ValueError):
        normalized_elementary([1, 2], -1)


@given(kappas)
def test_recursion_matches_enumeration(kappa):
    scale = max(1.0, float(np.max(np.abs(kappa)))) ** len(kappa)
    for l in range(len(kappa) + 2):
        assert abs(normalized_elementary(kappa, l) - enumerate_E(kappa.tolist(), l)) <= 1e-12 * scale


@given(kappas, st.randoms(use_true_random=False))
def test_permutation_invariance(kappa, rnd):
    perm = kappa.tolist()
    rnd.shuffle(perm)
    assert np.allclose(elementary_all(kappa), elementary_all(np.array(perm)), rtol=1e-12, atol=1e-12 * 5**6)


@given(kappas, st.floats(0.1, 3))
def test_homogeneity(kappa, c):
    E = elementary_all(kappa)
    Ec = elementary_all(c * kappa)
    l = np.arange(len(kappa) + 1)
    scale = (c * max(1.0, np.abs(kappa).max())) ** l
    assert np.all(np.abs(Ec - c**l * E) <= 1e-11 * scale)


def test_derivative_example():
    A = np.diag([1.0, 2.0, 3.0])
    Edot, res = elementary_derivative_checks(A, 2)
    assert np.allclose(np.diag(Edot), np.array([5, 4, 3]) / 3)
    assert math.isclose(np.trace(Edot), 4.0)
    assert math.isclose(np.sum(Edot * A), 22 / 3)
    assert math.isclose(np.sum(Edot * A @ A), 16.0)
    assert max(res.values()) < 1e-14


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    kappa = rng.normal(size=5)
    for l in range(1, 6):
        grad = elementary_gradient(kappa, l)
        eps = 1e-6
        fd = [(normalized_elementary(kappa + eps * e, l) - normalized_elementary(kappa - eps * e, l)) / (2 * eps)
              for e in np.eye(5)]
        assert np.allclose(grad, fd, atol=1e-8)


def test_derivative_rejects_asymmetric():
    with pytest.raises(ValueError):
        elementary_derivative(np.array([[1.0, 2.0], [0.0, 1.0]]), 1)


@given(st.integers(0, 2**32 - 1))
def test_identities_on_random_symmetric_matrices(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    B = rng.normal(size=(n, n))
    A = 0.5 * (B + B.T)
    for l in range(1, n + 1):
        _, res = elementary_derivative_checks(A, l)
        assert max(float(np.max(v)) for v in res.values()) < 1e-10


def test_cone_examples():
    inside, gap = cone_and_maclaurin([1.0, 2.0, 3.0], 3, 1, 1)
    assert inside
    assert math.isclose(gap, 1 / 3, rel_tol=1e-14)
    assert not in_garding_cone([-1.0, 5.0, 5.0], 3)
    assert normalized_elementary([-1.0, 5.0, 5.0], 3) == -25.0


def test_index_errors():
    with pytest.raises(ValueError):
        maclaurin_gap([1.0, 2.0, 3.0], 2, 3)
    with pytest.raises(ValueError):
        maclaurin_gap([1.0, 2.0, 3.0], 0, 1)
    with pytest.raises(ValueError):
        in_garding_cone([1.0, 2.0], 3)


def test_constant_vectors_have_zero_gap():
    for c in (0.1, 1.0, 2.0):
        for n in range(2, 7):
            for m in range(1, n):
                for l in range(1, m + 1):
                    assert abs(maclaurin_gap(np.full(n, c), l, m)) < 1e-12
