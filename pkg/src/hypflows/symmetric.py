"""Normalized elementary symmetric functions E_l and related identities."""

from __future__ import annotations

from math import comb

import numpy as np


def elementary_all(kappa) -> np.ndarray:
    """Normalized E_0..E_n of the last axis of ``kappa``.

    Uses the coefficient recursion for prod(1 + kappa_i t), O(n^2).
    """
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    e = np.zeros(kappa.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        k = kappa[..., i]
        for j in range(i + 1, 0, -1):
            e[..., j] = e[..., j] + k * e[..., j - 1]
    binoms = np.array([comb(n, j) for j in range(n + 1)], dtype=float)
    return e / binoms


def normalized_elementary(kappa, l: int):
    """E_l(kappa) = binom(n, l)^{-1} sigma_l(kappa); E_0 = 1 and E_l = 0 for l > n."""
    if l < 0:
        raise ValueError("l must be non-negative")
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    if l > n:
        return np.zeros(kappa.shape[:-1]) if kappa.ndim > 1 else 0.0
    out = elementary_all(kappa)[..., l]
    return out if kappa.ndim > 1 else float(out)


def elementary_gradient(kappa, l: int) -> np.ndarray:
    """dE_l / dkappa_i = binom(n,l)^{-1} sigma_{l-1}(kappa without kappa_i)."""
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    out = np.empty_like(kappa)
    for i in range(n):
        rest = np.delete(kappa, i, axis=-1)
        sig = elementary_all(rest)[..., l - 1] * comb(n - 1, l - 1) if l >= 1 else 0.0
        out[..., i] = sig / comb(n, l)
    return out


def elementary_derivative(A, l: int) -> np.ndarray:
    """dE_l / dA_ij for a symmetric matrix A, assembled in A's eigenframe."""
    A = np.asarray(A, dtype=float)
    if not np.allclose(A, np.swapaxes(A, -1, -2), rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("matrix is not symmetric")
    kappa, Q = np.linalg.eigh(A)
    d = elementary_gradient(kappa, l)
    return (Q * d[..., None, :]) @ np.swapaxes(Q, -1, -2)


def elementary_derivative_checks(A, l: int):
    """Return (Edot, residuals) for the three contraction identities.

    residuals is a dict with keys ``trace``, ``linear`` and ``quadratic``:
    Edot:I - l E_{l-1}, Edot:A - l E_l and Edot:A^2 - (n E_1 E_l - (n-l) E_{l+1}),
    each divided by max(1, |reference|).
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    if not 1 <= l <= n:
        raise ValueError(f"l={l} outside 1..{n}")
    Edot = elementary_derivative(A, l)
    E = elementary_all(np.linalg.eigvalsh(A))
    E_next = E[..., l + 1] if l + 1 <= n else 0.0
    refs = {
        "trace": l * E[..., l - 1],
        "linear": l * E[..., l],
        "quadratic": n * E[..., 1] * E[..., l] - (n - l) * E_next,
    }
    vals = {
        "trace": np.trace(Edot, axis1=-2, axis2=-1),
        "linear": np.sum(Edot * A, axis=(-2, -1)),
        "quadratic": np.sum(Edot * (A @ A), axis=(-2, -1)),
    }
    res = {
        key: np.abs(vals[key] - refs[key]) / np.maximum(1.0, np.abs(refs[key]))
        for key in refs
    }
    return Edot, res


def in_garding_cone(kappa, k: int):
    """kappa in Gamma_k^+, i.e. E_1..E_k all positive."""
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside 1..{n}")
    E = elementary_all(kappa)
    return np.all(E[..., 1:k + 1] > 0, axis=-1)


def maclaurin_gap(kappa, l: int, m: int):
    """E_l E_m - E_{m+1} E_{l-1}; nonnegative on Gamma_m^+ for 1 <= l <= m."""
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    if not 1 <= l <= m <= n - 1:
        raise ValueError(f"need 1 <= l <= m <= n-1, got l={l}, m={m}, n={n}")
    E = elementary_all(kappa)
    return E[..., l] * E[..., m] - E[..., m + 1] * E[..., l - 1]


def cone_and_maclaurin(kappa, k: int, l: int, m: int):
    return in_garding_cone(kappa, k), maclaurin_gap(kappa, l, m)
