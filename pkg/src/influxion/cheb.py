"""Chebyshev nodes, transforms, evaluation and differentiation.

Coefficient arrays are in ascending degree. Two-dimensional arrays are
indexed ``[x_degree, y_degree]`` and sample grids ``[x_node, y_node]``,
with Lobatto nodes ordered from +1 down to -1.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .validation import check_finite, check_positive_int


def lobatto_points(n: int) -> np.ndarray:
    """Chebyshev-Gauss-Lobatto nodes ``cos(pi j / n)``, ``j = 0..n``."""
    n = check_positive_int(n, "n")
    x = np.cos(np.pi * np.arange(n + 1) / n)
    # cos is not exact at the ends of the symmetric list
    x[0], x[-1] = 1.0, -1.0
    x = 0.5 * (x - x[::-1])
    if n % 2 == 0:
        x[n // 2] = 0.0
    return x


def gauss_points(n: int) -> np.ndarray:
    """Roots of ``T_n``: ``cos(pi (j + 1/2) / n)``, ``j = 0..n-1``."""
    n = check_positive_int(n, "n")
    x = np.cos(np.pi * (np.arange(n) + 0.5) / n)
    x = 0.5 * (x - x[::-1])
    if n % 2 == 1:
        x[n // 2] = 0.0
    return x


def vandermonde(x, n: int) -> np.ndarray:
    """Matrix ``V[i, k] = T_k(x_i)`` for ``k = 0..n``."""
    x = np.asarray(x, dtype=float)
    V = np.empty(x.shape + (n + 1,))
    V[..., 0] = 1.0
    if n >= 1:
        V[..., 1] = x
    for k in range(2, n + 1):
        V[..., k] = 2.0 * x * V[..., k - 1] - V[..., k - 2]
    return V


@lru_cache(maxsize=64)
def _lobatto_analysis(n: int) -> np.ndarray:
    # discrete cosine transform of type I as a dense matrix
    j = np.arange(n + 1)
    M = np.cos(np.pi * np.outer(j, j) / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    M = M / c[None, :]
    M = (2.0 / n) * M / c[:, None]
    M.setflags(write=False)
    return M


@lru_cache(maxsize=64)
def _lobatto_synthesis(n: int) -> np.ndarray:
    V = vandermonde(lobatto_points(n), n)
    V.setflags(write=False)
    return V


def to_coeffs(values) -> np.ndarray:
    """Chebyshev coefficients of the interpolant through Lobatto samples.

    ``values[j]`` is the sample at ``cos(pi j / n)`` where ``n = len(values) - 1``.
    A single sample is treated as a constant.
    """
    v = check_finite(values, "values")
    if v.ndim != 1 or v.size == 0:
        raise ValueError("values must be a non-empty 1-D array")
    if v.size == 1:
        return v.copy()
    return _lobatto_analysis(v.size - 1) @ v


def to_values(coeffs) -> np.ndarray:
    """Samples of a Chebyshev series at its own Lobatto nodes."""
    c = check_finite(coeffs, "coeffs")
    if c.ndim != 1 or c.size == 0:
        raise ValueError("coeffs must be a non-empty 1-D array")
    if c.size == 1:
        return c.copy()
    return _lobatto_synthesis(c.size - 1) @ c


def to_coeffs_2d(values) -> np.ndarray:
    """Transform a Lobatto-grid field ``values[i, j]`` to coefficients ``a[k, l]``."""
    v = check_finite(values, "values")
    if v.ndim != 2 or min(v.shape) < 2:
        raise ValueError("values must be a 2-D array with at least 2 nodes per axis")
    K, L = v.shape[0] - 1, v.shape[1] - 1
    return _lobatto_analysis(K) @ v @ _lobatto_analysis(L).T


def to_values_2d(coeffs) -> np.ndarray:
    """Evaluate a coefficient array on its own Lobatto grid."""
    a = check_finite(coeffs, "coeffs")
    if a.ndim != 2 or min(a.shape) < 2:
        raise ValueError("coeffs must be a 2-D array with at least 2 modes per axis")
    K, L = a.shape[0] - 1, a.shape[1] - 1
    return _lobatto_synthesis(K) @ a @ _lobatto_synthesis(L).T


def interp_coeffs(x, values, degree: int) -> np.ndarray:
    """Coefficients up to ``degree`` interpolating ``values`` at nodes ``x``.

    Requires ``len(x) == degree + 1``; used for Gauss-node samples.
    """
    x = np.asarray(x, dtype=float)
    if x.size != degree + 1:
        raise ValueError(f"need {degree + 1} nodes for degree {degree}, got {x.size}")
    return np.linalg.solve(vandermonde(x, degree), np.asarray(values, dtype=float))


def eval_series(coeffs, xi):
    """Evaluate ``sum_k c_k T_k(xi)`` by Clenshaw's recurrence.

    ``xi`` may be a scalar or an array; it must lie in ``[-1, 1]`` up to 1e-12.
    """
    c = check_finite(coeffs, "coeffs")
    if c.ndim != 1 or c.size == 0:
        raise ValueError("coeffs must be a non-empty 1-D array")
    x = np.asarray(xi, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-12) or not np.all(np.isfinite(x)):
        raise ValueError("evaluation point outside [-1, 1]")
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for ck in c[:0:-1]:
        b1, b2 = 2.0 * x * b1 - b2 + ck, b1
    out = x * b1 - b2 + c[0]
    return float(out) if out.ndim == 0 else out


def diff_coeffs(coeffs, scale: float = 1.0) -> np.ndarray:
    """Coefficients of the derivative of a Chebyshev series.

    ``scale`` is the half-length of the physical interval, so the result is
    the derivative with respect to ``x = scale * xi``. The output keeps the
    input length (the top coefficient is zero).
    """
    c = check_finite(coeffs, "coeffs")
    n = c.size - 1
    d = np.zeros(n + 2)
    for k in range(n, 0, -1):
        d[k - 1] = d[k + 1] + 2.0 * k * c[k]
    d[0] *= 0.5
    return d[: n + 1] / scale


@lru_cache(maxsize=64)
def lobatto_diff_matrix(n: int) -> np.ndarray:
    """Collocation differentiation matrix on ``lobatto_points(n)``."""
    x = lobatto_points(n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c = c * (-1.0) ** np.arange(n + 1)
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    D.setflags(write=False)
    return D


def eval_grid_2d(coeffs, xi, eta) -> np.ndarray:
    """Evaluate a 2-D series on the tensor grid ``xi x eta`` (reference coordinates)."""
    a = np.asarray(coeffs, dtype=float)
    K, L = a.shape[0] - 1, a.shape[1] - 1
    return vandermonde(np.asarray(xi, float), K) @ a @ vandermonde(np.asarray(eta, float), L).T


def eval_points_2d(coeffs, xi, eta) -> np.ndarray:
    """Evaluate a 2-D series at paired reference coordinates ``(xi[i], eta[i])``."""
    a = np.asarray(coeffs, dtype=float)
    K, L = a.shape[0] - 1, a.shape[1] - 1
    Vx = vandermonde(np.asarray(xi, float), K)
    Vy = vandermonde(np.asarray(eta, float), L)
    return np.einsum("...k,kl,...l->...", Vx, a, Vy)
