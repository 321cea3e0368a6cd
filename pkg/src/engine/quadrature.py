"""
Quadrature rules and Chebyshev panel utilities shared by the position-domain code.
"""
from functools import lru_cache
from typing import Tuple

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy import fft, special


# ==================== Gauss rules on [0, 1] ====================

@lru_cache(maxsize=256)
def gauss_jacobi_unit(n: int, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for ∫_0^1 (1-x)^a x^b f(x) dx."""
    y, w = special.roots_jacobi(n, a, b)
    x = (1.0 + y) / 2.0
    w = w / 2.0 ** (a + b + 1.0)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=64)
def gauss_legendre_unit(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for ∫_0^1 f(x) dx."""
    y, w = special.roots_legendre(n)
    x = (1.0 + y) / 2.0
    w = w / 2.0
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


# ==================== Chebyshev points of the first kind ====================

@lru_cache(maxsize=32)
def chebyshev_nodes(n: int) -> np.ndarray:
    """Ascending first-kind Chebyshev points on [-1, 1]."""
    j = np.arange(n)
    x = -np.cos((2 * j + 1) * np.pi / (2 * n))
    x.setflags(write=False)
    return x


@lru_cache(maxsize=32)
def barycentric_weights(n: int) -> np.ndarray:
    j = np.arange(n)
    w = (-1.0) ** j * np.sin((2 * j + 1) * np.pi / (2 * n))
    w.setflags(write=False)
    return w


def interpolation_matrix(n: int, targets: np.ndarray) -> np.ndarray:
    """Rows map values at the n reference nodes to values at ``targets`` in [-1, 1]."""
    x = chebyshev_nodes(n)
    w = barycentric_weights(n)
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    diff = targets[:, None] - x[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-15, rtol=0.0)
    diff[exact] = 1.0
    terms = w[None, :] / diff
    rows = terms / terms.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    if hit.any():
        rows[hit] = exact[hit].astype(float)
    return rows


@lru_cache(maxsize=32)
def differentiation_matrix(n: int) -> np.ndarray:
    """d/dx on [-1, 1] at the reference nodes."""
    x = chebyshev_nodes(n)
    w = barycentric_weights(n)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    d = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    d.setflags(write=False)
    return d


def chebyshev_coefficients(values: np.ndarray) -> np.ndarray:
    """Coefficients a_k of Σ a_k T_k from samples at the ascending reference nodes."""
    values = np.asarray(values)
    n = values.shape[-1]
    descending = values[..., ::-1]
    a = fft.dct(descending.real, type=2, axis=-1) / n
    if np.iscomplexobj(values):
        a = a + 1j * fft.dct(descending.imag, type=2, axis=-1) / n
    a[..., 0] /= 2.0
    return a


def chebyshev_derivatives(coeffs: np.ndarray, x: float, order: int) -> np.ndarray:
    """[f(x), f'(x), ..., f^{(order)}(x)] for f = Σ a_k T_k on [-1, 1]."""
    out = np.empty(order + 1, dtype=complex)
    c = np.asarray(coeffs, dtype=complex)
    for k in range(order + 1):
        out[k] = cheb.chebval(x, c) if len(c) else 0.0
        c = cheb.chebder(c) if len(c) > 1 else np.zeros(1, dtype=complex)
    return out


def endpoint_derivative_weights(n: int, k: int) -> np.ndarray:
    """T_j^{(k)}(-1) for j < n: (-1)^{j+k} Π_{i<k} (j² - i²)/(2i + 1)."""
    j = np.arange(n, dtype=float)
    out = (-1.0) ** (j + k)
    for i in range(k):
        out = out * (j ** 2 - i ** 2) / (2 * i + 1)
    return out
