"""
Reference values for verification.

Nothing here imports the solver modules; the only shared pieces are the error
types and logging.
"""
import cmath
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import gamma as sp_gamma
from scipy.special import roots_jacobi, roots_legendre

from src.engine.errors import DomainError, ParameterUnsupported
from src.logging_config import get_logger

logger = get_logger("borelsum.oracles")

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class OracleResult:
    value: complex
    method: str
    est_error: float

    def to_dict(self) -> dict:
        return {
            "value": [self.value.real, self.value.imag],
            "method": self.method,
            "est_error": self.est_error,
        }


# ==================== K_μ ====================

BESSEL_NODES = 200
BESSEL_DECAY = 40.0


def _bessel_cutoff(mu: float, rz: float) -> float:
    T = 0.5
    while rz * (math.cosh(T) - 1.0) - abs(mu) * T < BESSEL_DECAY:
        T += 0.1
    return T


def _trapezoid(samples: np.ndarray, step: float) -> complex:
    return complex(step * (np.sum(samples) - 0.5 * (samples[0] + samples[-1])))


def bessel_k(mu: float, z: complex) -> OracleResult:
    """
    K_μ(z) = ∫_0^∞ e^{-z cosh t} cosh(μt) dt.

    After t = sinh x the integrand is even in x and decays like exp(-z cosh(sinh x)),
    so the trapezoidal rule on [0, asinh T] with 200 steps converges double
    exponentially. Every other node gives the error estimate.
    """
    z, mu = complex(z), float(mu)
    if z.real <= 0:
        raise DomainError("bessel_k needs Re z > 0", {"z": [z.real, z.imag]})
    T = _bessel_cutoff(mu, z.real)
    x_max = math.asinh(T)
    x = np.linspace(0.0, x_max, BESSEL_NODES + 1)
    h = x_max / BESSEL_NODES
    t = np.sinh(x)
    jacobian = np.cosh(x)
    f = np.exp(-z * (np.cosh(t) - 1.0)) * np.cosh(mu * t) * jacobian

    fine = _trapezoid(f, h)
    coarse = _trapezoid(f[::2], 2 * h)
    scale = cmath.exp(-z)
    value = scale * fine
    error = max(abs(scale) * abs(fine - coarse), 10 * EPS * abs(value))
    logger.debug_with("bessel_k", mu=mu, z=[z.real, z.imag], nodes=BESSEL_NODES, cutoff=T)
    return OracleResult(value, "double_exponential", error)


# ==================== ₂F₁ ====================

SERIES_RADIUS = 0.8
SERIES_MAX_TERMS = 5000


def _is_nonpositive_integer(c: float) -> bool:
    return c <= 0 and abs(c - round(c)) < 1e-14


def _hyp2f1_series(a: float, b: float, c: float, x: complex) -> OracleResult:
    total = 1.0 + 0j
    term = 1.0 + 0j
    for k in range(SERIES_MAX_TERMS):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * x
        total += term
        if term == 0 or (k > 4 and abs(term) < EPS * abs(total)):
            break
    else:
        raise ParameterUnsupported("hypergeometric series did not settle",
                                   {"a": a, "b": b, "c": c, "x": [x.real, x.imag]})
    tail = abs(term) / max(1.0 - abs(x), 1e-3)
    return OracleResult(total, "series", max(tail, 10 * EPS * abs(total)))


def _euler_integral(a: float, b: float, c: float, x: complex, n: int) -> complex:
    alpha, beta = c - b - 1.0, b - 1.0
    s, w = roots_jacobi(n, alpha, beta)
    t = (1.0 + s) / 2.0
    w = w / 2.0 ** (alpha + beta + 1.0)
    return complex(np.sum(w * (1.0 - x * t) ** (-a)))


def _hyp2f1_euler(a: float, b: float, c: float, x: complex) -> OracleResult:
    prefactor = sp_gamma(c) / (sp_gamma(b) * sp_gamma(c - b))
    coarse = prefactor * _euler_integral(a, b, c, x, 64)
    fine = prefactor * _euler_integral(a, b, c, x, 128)
    return OracleResult(fine, "integral", max(abs(fine - coarse), 10 * EPS * abs(fine)))


def hyp2f1(a: float, b: float, c: float, x: complex) -> OracleResult:
    """
    Gauss hypergeometric ₂F₁(a, b; c; x) for real parameters and x off [1, ∞).

    The power series is summed for |x| < 0.8; elsewhere the Euler integral
    Γ(c)/(Γ(b)Γ(c-b)) ∫_0^1 t^{b-1}(1-t)^{c-b-1}(1-xt)^{-a} dt is used, with a and b
    swapped when that makes c > b > 0.
    """
    x = complex(x)
    a, b, c = float(a), float(b), float(c)
    if a == 0 or b == 0:
        return OracleResult(1.0 + 0j, "series", 0.0)
    if abs(x.imag) < 1e-300 and x.real >= 1.0:
        raise DomainError("hyp2f1 is cut along [1, inf)", {"x": [x.real, x.imag]})
    if _is_nonpositive_integer(c):
        raise ParameterUnsupported("c must not be a non-positive integer", {"c": c})
    if abs(x) < SERIES_RADIUS:
        return _hyp2f1_series(a, b, c, x)
    if not c > b > 0 and c > a > 0:
        a, b = b, a
    if c > b > 0:
        return _hyp2f1_euler(a, b, c, x)
    if abs(x) < 1.0:
        return _hyp2f1_series(a, b, c, x)
    raise ParameterUnsupported(
        "no series or Euler-integral representation for these parameters",
        {"a": a, "b": b, "c": c, "x": [x.real, x.imag]},
    )


# ==================== Ai ====================

AIRY_RANGE: Tuple[float, float] = (0.5, 10.0)
AIRY_LENGTH = 6.0
AIRY_PANEL = 0.25


def _airy_ray(y: float, n: int) -> complex:
    t0 = math.sqrt(y)
    direction = cmath.exp(1j * math.pi / 3)
    x, w = roots_legendre(n)
    edges = np.arange(0.0, AIRY_LENGTH + 1e-12, AIRY_PANEL)
    total = 0j
    for lo, hi in zip(edges[:-1], edges[1:]):
        r = lo + (hi - lo) * (x + 1.0) / 2.0
        t = t0 + r * direction
        # phase measured from its saddle value
        phase = t ** 3 / 3.0 - y * t + (2.0 / 3.0) * y * t0
        total += (hi - lo) / 2.0 * np.sum(w * np.exp(phase))
    return direction * total


def airy_ai(y: float) -> OracleResult:
    """Ai(y) from the contour through the saddle √y along the rays at ±60°."""
    lo, hi = AIRY_RANGE
    if not lo <= y <= hi:
        raise DomainError(f"airy_ai supports y in [{lo}, {hi}]", {"y": y})
    saddle = math.exp(-(2.0 / 3.0) * y ** 1.5)
    coarse = saddle * _airy_ray(y, 16).imag / math.pi
    fine = saddle * _airy_ray(y, 32).imag / math.pi
    t0 = math.sqrt(y)
    truncation = saddle * math.exp(-t0 * AIRY_LENGTH ** 2 / 2.0 - AIRY_LENGTH ** 3 / 3.0)
    error = max(abs(fine - coarse) + truncation, 10 * EPS * abs(fine))
    return OracleResult(complex(fine), "integral", error)
