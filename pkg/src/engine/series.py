"""
Truncated algebra of fractionally shifted power series.

Frequency-side objects are trans-monomials e^{-αz} z^{-τ} Σ c_k z^{-k}; their
Borel images live in ζ_α^{τ-1} ℂ[[ζ_α]] plus an optional multiple of the
convolution unit δ. Coefficients are complex floats, or ``Fraction`` in exact mode.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from numbers import Number
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from src.engine.errors import ExactModeUnsupported, GammaPoleError
from src.logging_config import get_logger

logger = get_logger("borelsum.series")

Scalar = Union[complex, float, Fraction]

INTEGER_SLACK = 1e-9


class SeriesVariable(Enum):
    POSITION = "position"
    FREQUENCY = "frequency"


# ==================== scalar helpers ====================

def is_exact(value: Any) -> bool:
    return isinstance(value, (Fraction, int)) and not isinstance(value, bool)


def is_integer(value: Scalar) -> bool:
    if isinstance(value, Fraction):
        return value.denominator == 1
    if isinstance(value, int):
        return True
    value = complex(value)
    return abs(value.imag) < INTEGER_SLACK and abs(value.real - round(value.real)) < INTEGER_SLACK


def gamma(x: Scalar, exact: bool = False) -> Scalar:
    """Γ(x); exact only for positive integers, where it is a factorial."""
    if exact:
        x = Fraction(x)
        if x.denominator != 1:
            raise ExactModeUnsupported(f"Gamma({x}) has no rational value")
        if x <= 0:
            raise GammaPoleError(f"Gamma pole at {x}", {"argument": str(x)})
        return Fraction(math.factorial(int(x) - 1))
    xc = complex(x)
    if xc.imag == 0 and xc.real <= 0 and is_integer(xc):
        raise GammaPoleError(f"Gamma pole at {xc.real:g}", {"argument": xc.real})
    if xc.imag == 0:
        return complex(special.gamma(xc.real))
    return complex(special.gamma(xc))


def beta(p: Scalar, q: Scalar, exact: bool = False) -> Scalar:
    if exact:
        return gamma(p, True) * gamma(q, True) / gamma(Fraction(p) + Fraction(q), True)
    pc, qc = complex(p), complex(q)
    if pc.imag == 0 and qc.imag == 0 and pc.real > 0 and qc.real > 0:
        return complex(special.beta(pc.real, qc.real))
    return gamma(pc) * gamma(qc) / gamma(pc + qc)


def _zero(exact: bool) -> Scalar:
    return Fraction(0) if exact else 0j


def _coerce(value: Any, exact: bool) -> Scalar:
    if exact:
        return Fraction(value)
    return complex(value)


def _format_scalar(value: Scalar) -> Any:
    if isinstance(value, Fraction):
        return str(value)
    value = complex(value)
    return [value.real, value.imag]


def _parse_scalar(raw: Any) -> Scalar:
    if isinstance(raw, str):
        return Fraction(raw)
    if isinstance(raw, (list, tuple)):
        return complex(raw[0], raw[1])
    if isinstance(raw, int):
        return Fraction(raw)
    return complex(raw)


# ==================== types ====================

@dataclass(frozen=True)
class ShiftedSeries:
    """ζ^σ Σ c_k ζ^k (position) or z^{-σ} Σ c_k z^{-k} (frequency), truncated at N"""
    shift: Scalar
    variable: SeriesVariable
    coeffs: Tuple[Scalar, ...]

    def __post_init__(self):
        coeffs = tuple(self.coeffs)
        if not coeffs:
            raise ValueError("a truncated series needs at least one coefficient")
        exact = is_exact(self.shift) and all(is_exact(c) for c in coeffs)
        object.__setattr__(self, "coeffs", tuple(_coerce(c, exact) for c in coeffs))
        object.__setattr__(self, "shift", Fraction(self.shift) if exact else _real_or_complex(self.shift))
        if isinstance(self.variable, str):
            object.__setattr__(self, "variable", SeriesVariable(self.variable))
        if self.variable == SeriesVariable.POSITION and complex(self.shift).real <= -1:
            raise ValueError(f"position series needs shift > -1, got {self.shift}")

    @property
    def truncation_order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def exact(self) -> bool:
        return isinstance(self.shift, Fraction) and all(isinstance(c, Fraction) for c in self.coeffs)

    @property
    def top(self) -> float:
        """Highest exponent whose coefficient is determined."""
        return complex(self.shift).real + self.truncation_order

    @classmethod
    def position(cls, shift: Scalar, coeffs: Sequence[Any]) -> "ShiftedSeries":
        return cls(shift, SeriesVariable.POSITION, tuple(coeffs))

    @classmethod
    def frequency(cls, shift: Scalar, coeffs: Sequence[Any]) -> "ShiftedSeries":
        return cls(shift, SeriesVariable.FREQUENCY, tuple(coeffs))

    def as_array(self) -> np.ndarray:
        return np.array([complex(c) for c in self.coeffs], dtype=complex)

    def to_float(self) -> "ShiftedSeries":
        return ShiftedSeries(float(self.shift) if isinstance(self.shift, Fraction) else self.shift,
                             self.variable, tuple(complex(c) for c in self.coeffs))

    def scaled(self, factor: Scalar) -> "ShiftedSeries":
        if not (self.exact and is_exact(factor)):
            factor = complex(factor)
        return ShiftedSeries(self.shift, self.variable, tuple(c * factor for c in self.coeffs))

    def truncated(self, order: int) -> "ShiftedSeries":
        return ShiftedSeries(self.shift, self.variable, self.coeffs[: max(order, 0) + 1])

    def terms(self) -> Dict[Scalar, Scalar]:
        """Exponent → coefficient, exponents counted in the series variable's own power."""
        return {self.shift + k: c for k, c in enumerate(self.coeffs)}

    def equivalent(self, other: "ShiftedSeries", tol: float = 0.0) -> bool:
        """Same object on the common range of determined orders (shifts may differ by integers)."""
        if self.variable != other.variable:
            return False
        offset = other.shift - self.shift
        if not is_integer(offset):
            return False
        lo = min(complex(self.shift).real, complex(other.shift).real)
        hi = min(self.top, other.top)
        mine, theirs = _dense(self, lo, hi), _dense(other, lo, hi)
        if tol == 0.0 and self.exact and other.exact:
            return mine == theirs
        scale = max([1.0] + [abs(complex(c)) for c in mine + theirs])
        return all(abs(complex(a) - complex(b)) <= tol * scale for a, b in zip(mine, theirs))

    def to_dict(self) -> dict:
        return {
            "shift": str(self.shift) if isinstance(self.shift, Fraction) else _format_real(self.shift),
            "variable": self.variable.value,
            "coeffs": [_format_scalar(c) for c in self.coeffs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ShiftedSeries":
        shift = data["shift"]
        shift = Fraction(shift) if isinstance(shift, (str, int)) else shift
        return cls(shift, SeriesVariable(data.get("variable", "frequency")),
                   tuple(_parse_scalar(c) for c in data["coeffs"]))


def _real_or_complex(value: Any) -> Union[float, complex]:
    value = complex(value)
    return value.real if value.imag == 0 else value


def _format_real(value: Any) -> Any:
    value = complex(value)
    return value.real if value.imag == 0 else [value.real, value.imag]


def _dense(s: ShiftedSeries, lo: float, hi: float) -> List[Scalar]:
    start = int(round(complex(s.shift).real - lo))
    count = int(math.floor(hi - lo + INTEGER_SLACK)) + 1
    out = [_zero(s.exact)] * count
    for k, c in enumerate(s.coeffs):
        if 0 <= start + k < count:
            out[start + k] = c
    return out


@dataclass(frozen=True)
class TransMonomial:
    """e^{-αz} z^{-τ} Σ c_k z^{-k}"""
    alpha: complex
    tau: Scalar
    series: ShiftedSeries

    def __post_init__(self):
        if self.series.variable != SeriesVariable.FREQUENCY:
            raise ValueError("trans-monomial series must carry the frequency tag")
        if complex(self.series.shift) != 0:
            raise ValueError("trans-monomial series must have shift 0; fold it into tau")

    @property
    def coeffs(self) -> Tuple[Scalar, ...]:
        return self.series.coeffs

    @property
    def truncation_order(self) -> int:
        return self.series.truncation_order

    @classmethod
    def from_series(cls, s: ShiftedSeries, alpha: complex = 0) -> "TransMonomial":
        zero = Fraction(0) if s.exact else 0
        return cls(alpha, s.shift, ShiftedSeries.frequency(zero, s.coeffs))

    def as_series(self) -> ShiftedSeries:
        """The z^{-τ} Σ c_k z^{-k} factor as one frequency series with shift τ."""
        return ShiftedSeries.frequency(self.tau, self.series.coeffs)

    def scaled(self, factor: Scalar) -> "TransMonomial":
        return TransMonomial(self.alpha, self.tau, self.series.scaled(factor))

    def equivalent(self, other: "TransMonomial", tol: float = 0.0) -> bool:
        if abs(complex(self.alpha) - complex(other.alpha)) > max(tol, 1e-14):
            return False
        return self.as_series().equivalent(other.as_series(), tol)

    def evaluate(self, z: complex) -> complex:
        """Partial sum at a finite z (principal branch of z^{-τ})."""
        z = complex(z)
        total = sum(complex(c) * z ** (-k) for k, c in enumerate(self.coeffs))
        return complex(np.exp(-complex(self.alpha) * z) * z ** (-complex(self.tau)) * total)

    def to_dict(self) -> dict:
        alpha = complex(self.alpha)
        return {
            "alpha": [alpha.real, alpha.imag],
            "tau": str(self.tau) if isinstance(self.tau, Fraction) else _format_real(self.tau),
            "series": self.series.to_dict(),
        }


@dataclass(frozen=True)
class DeltaPlusSeries:
    """c·δ + position series; ``horizon`` records the determined range when the series is absent"""
    delta_coeff: Scalar
    series: Optional[ShiftedSeries] = None
    horizon: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        if self.series is not None and self.series.variable != SeriesVariable.POSITION:
            raise ValueError("delta-plus series lives in the position domain")

    @property
    def top(self) -> float:
        if self.series is not None:
            return self.series.top
        return self.horizon if self.horizon is not None else -1.0

    @property
    def lowest(self) -> float:
        if self.delta_coeff != 0:
            return -1.0
        if self.series is not None:
            return complex(self.series.shift).real
        return math.inf

    @classmethod
    def wrap(cls, value: Union["DeltaPlusSeries", ShiftedSeries]) -> "DeltaPlusSeries":
        if isinstance(value, DeltaPlusSeries):
            return value
        return cls(Fraction(0) if value.exact else 0j, value)

    def equivalent(self, other: "DeltaPlusSeries", tol: float = 0.0) -> bool:
        if abs(complex(self.delta_coeff) - complex(other.delta_coeff)) > tol * max(1.0, abs(complex(self.delta_coeff))):
            return False
        if self.series is None or other.series is None:
            rest = self.series or other.series
            return rest is None or all(abs(complex(c)) <= tol for c in rest.coeffs)
        return self.series.equivalent(other.series, tol)


# ==================== transforms ====================

def borel_transform(t: TransMonomial) -> Union[ShiftedSeries, DeltaPlusSeries]:
    """
    Term-wise e^{-αz} z^{-τ-k} ↦ ζ_α^{τ+k-1}/Γ(τ+k).

    The z^0 term becomes a multiple of δ and the result is then a DeltaPlusSeries.
    """
    exact = t.series.exact and is_exact(t.tau) and is_integer(t.tau)
    tau = Fraction(t.tau) if is_exact(t.tau) else t.tau
    coeffs = t.coeffs
    n = len(coeffs) - 1

    delta_index = None
    if is_integer(tau) and complex(tau).real <= 0:
        delta_index = -int(round(complex(tau).real))

    for k, c in enumerate(coeffs):
        if c == 0:
            continue
        arg = tau + k
        if is_integer(arg) and complex(arg).real < 0:
            raise GammaPoleError(
                f"term z^{{-({tau}+{k})}} has no Borel image (Gamma pole at {arg})",
                {"order": k, "argument": str(arg)},
            )

    if delta_index is None:
        out = [c / gamma(tau + k, exact) for k, c in enumerate(coeffs)]
        return ShiftedSeries.position(tau - 1, out)

    delta = coeffs[delta_index] if delta_index <= n else _zero(exact)
    rest = [coeffs[k] / gamma(tau + k, exact) for k in range(delta_index + 1, n + 1)]
    if not rest:
        return DeltaPlusSeries(delta, None, horizon=float(n - delta_index - 1))
    return DeltaPlusSeries(delta, ShiftedSeries.position(Fraction(0) if exact else 0.0, rest))


def formal_laplace(s: Union[ShiftedSeries, DeltaPlusSeries], base: complex = 0) -> TransMonomial:
    """ζ_α^{σ+k} ↦ Γ(σ+k+1) e^{-αz} z^{-σ-k-1}; δ ↦ e^{-αz}."""
    if isinstance(s, DeltaPlusSeries):
        return _formal_laplace_delta(s, base)
    if s.variable != SeriesVariable.POSITION:
        raise ValueError("formal_laplace expects a position series")
    exact = s.exact and is_integer(s.shift)
    out = [c * gamma(s.shift + k + 1, exact) for k, c in enumerate(s.coeffs)]
    zero = Fraction(0) if exact else 0
    return TransMonomial(base, s.shift + 1, ShiftedSeries.frequency(zero, out))


def _formal_laplace_delta(s: DeltaPlusSeries, base: complex) -> TransMonomial:
    if s.series is None:
        order = max(int(math.floor(s.top + 1 + INTEGER_SLACK)), 0)
        exact = is_exact(s.delta_coeff)
        coeffs = [s.delta_coeff] + [_zero(exact)] * order
        return TransMonomial(base, Fraction(0) if exact else 0.0, ShiftedSeries.frequency(0, coeffs))
    inner = formal_laplace(s.series, base)
    gap = inner.tau
    if not (is_integer(gap) and complex(gap).real >= 1):
        raise ValueError("δ and a fractionally shifted series do not form one trans-monomial")
    gap = int(round(complex(gap).real))
    exact = inner.series.exact and is_exact(s.delta_coeff)
    coeffs = [_coerce(s.delta_coeff, exact)] + [_zero(exact)] * (gap - 1)
    coeffs += [_coerce(c, exact) for c in inner.coeffs]
    zero = Fraction(0) if exact else 0.0
    return TransMonomial(base, zero, ShiftedSeries.frequency(zero, coeffs))


# ==================== products ====================

def cauchy_product(a: ShiftedSeries, b: ShiftedSeries) -> ShiftedSeries:
    if a.variable != b.variable:
        raise ValueError("cauchy_product needs series with the same variable tag")
    n = min(a.truncation_order, b.truncation_order)
    exact = a.exact and b.exact
    out = []
    for k in range(n + 1):
        acc = _zero(exact)
        for j in range(k + 1):
            acc += a.coeffs[j] * b.coeffs[k - j]
        out.append(acc)
    return ShiftedSeries(a.shift + b.shift, a.variable, tuple(out))


def _convolve_series(a: ShiftedSeries, b: ShiftedSeries) -> ShiftedSeries:
    exact = a.exact and b.exact and is_integer(a.shift) and is_integer(b.shift)
    p, q = a.shift, b.shift
    n = min(a.truncation_order, b.truncation_order)
    out = []
    for k in range(n + 1):
        acc = _zero(exact)
        for j in range(k + 1):
            if a.coeffs[j] == 0 or b.coeffs[k - j] == 0:
                continue
            acc += a.coeffs[j] * b.coeffs[k - j] * beta(p + j + 1, q + k - j + 1, exact)
        out.append(acc)
    return ShiftedSeries.position(p + q + 1, out)


def _sum_truncated(parts: List[ShiftedSeries], top: float) -> Optional[ShiftedSeries]:
    if not parts:
        return None
    exact = all(p.exact for p in parts)
    shift = min((p.shift for p in parts), key=lambda s: complex(s).real)
    count = int(math.floor(top - complex(shift).real + INTEGER_SLACK)) + 1
    if count <= 0:
        return None
    out = [_zero(exact)] * count
    for part in parts:
        offset = part.shift - shift
        if not is_integer(offset):
            raise ValueError("series with non-integer relative shift cannot be added")
        offset = int(round(complex(offset).real))
        for k, c in enumerate(part.coeffs):
            if offset + k < count:
                out[offset + k] += c if exact else complex(c)
    return ShiftedSeries.position(shift, out)


def convolution_product(
    a: Union[DeltaPlusSeries, ShiftedSeries], b: Union[DeltaPlusSeries, ShiftedSeries]
) -> DeltaPlusSeries:
    """Bilinear extension of ζ^p ∗ ζ^q = B(p+1, q+1) ζ^{p+q+1}, with δ as the unit."""
    a, b = DeltaPlusSeries.wrap(a), DeltaPlusSeries.wrap(b)
    parts = []
    if a.series is not None and b.series is not None:
        parts.append(_convolve_series(a.series, b.series))
    if a.delta_coeff != 0 and b.series is not None:
        parts.append(b.series.scaled(a.delta_coeff))
    if b.delta_coeff != 0 and a.series is not None:
        parts.append(a.series.scaled(b.delta_coeff))
    top = min(a.top + b.lowest + 1, b.top + a.lowest + 1)
    series = _sum_truncated(parts, top)
    return DeltaPlusSeries(a.delta_coeff * b.delta_coeff, series,
                           horizon=None if series is not None else top)


def trans_product(a: TransMonomial, b: TransMonomial) -> TransMonomial:
    series = cauchy_product(a.series, b.series)
    return TransMonomial(a.alpha + b.alpha, a.tau + b.tau, series)


# ==================== derivatives ====================

def derivative_z(t: TransMonomial) -> TransMonomial:
    """Whole derivative ∂_z of a trans-monomial, kept at truncation order N."""
    exact = t.series.exact and is_exact(t.tau) and is_exact(t.alpha)
    coeffs = t.coeffs
    if complex(t.alpha) == 0:
        out = [-(t.tau + k) * c for k, c in enumerate(coeffs)]
        zero = Fraction(0) if exact else 0
        return TransMonomial(t.alpha, t.tau + 1, ShiftedSeries.frequency(zero, out))
    alpha = Fraction(t.alpha) if exact else complex(t.alpha)
    out = []
    for k, c in enumerate(coeffs):
        value = -alpha * c
        if k >= 1:
            value -= (t.tau + k - 1) * coeffs[k - 1]
        out.append(value)
    zero = Fraction(0) if exact else 0
    return TransMonomial(t.alpha, t.tau, ShiftedSeries.frequency(zero, out))


def times_power(s: ShiftedSeries, k: int = 1, factor: Scalar = -1) -> ShiftedSeries:
    """factor·ζ^k·s"""
    return ShiftedSeries(s.shift + k, s.variable, s.scaled(factor).coeffs)


# ==================== Gevrey diagnostics ====================

def gevrey_radius_estimate(s: ShiftedSeries) -> float:
    """
    Borel-plane radius from the growth of |c_n/n!| over the upper half of orders.

    Fits log|c_n/n!| ≈ a + b·n + c·log n + d·n log n; R = e^{-b}. A clearly
    negative d means super-factorial decay and the transform is entire.
    """
    if s.truncation_order < 4:
        raise ValueError("gevrey_radius_estimate needs N >= 4")
    coeffs = [abs(complex(c)) for c in s.coeffs]
    start = max(1, s.truncation_order // 2)
    orders = [n for n in range(start, len(coeffs)) if coeffs[n] > 0]
    if not orders:
        return math.inf
    if len(orders) < 3:
        return math.inf if all(coeffs[n] == 0 for n in range(start, len(coeffs))) else 1.0

    n = np.array(orders, dtype=float)
    y = np.array([math.log(coeffs[k]) - math.lgamma(k + 1) for k in orders])
    columns = [np.ones_like(n), n, n * np.log(n)]
    if len(orders) >= 6:
        columns.insert(2, np.log(n))
    design = np.stack(columns, axis=1)
    fit, *_ = np.linalg.lstsq(design, y, rcond=None)
    slope, nlogn = fit[1], fit[-1]
    logger.debug_with("gevrey fit", slope=float(slope), nlogn=float(nlogn), points=len(orders))
    if nlogn < -0.5:
        return math.inf
    return float(math.exp(-slope))


# ==================== power series in one variable ====================
# Plain coefficient arrays a[0] + a[1] x + ..., all truncated to a common length.

def series_mul(a: Sequence[complex], b: Sequence[complex], length: int) -> np.ndarray:
    out = np.zeros(length, dtype=complex)
    for i, ai in enumerate(a[:length]):
        if ai == 0:
            continue
        for j, bj in enumerate(b[: length - i]):
            out[i + j] += ai * bj
    return out


def series_power(a: Sequence[complex], k: int, length: int) -> np.ndarray:
    out = np.zeros(length, dtype=complex)
    out[0] = 1.0
    for _ in range(k):
        out = series_mul(out, a, length)
    return out


def series_sqrt1p(a: Sequence[complex], length: int) -> np.ndarray:
    """√(1 + a(x)) with a(0) = 0, by the recursion s² = 1 + a."""
    a = np.asarray(list(a) + [0] * length, dtype=complex)[:length]
    if abs(a[0]) > 1e-14:
        raise ValueError("series_sqrt1p needs a vanishing constant term")
    s = np.zeros(length, dtype=complex)
    s[0] = 1.0
    for n in range(1, length):
        acc = a[n] - sum(s[j] * s[n - j] for j in range(1, n))
        s[n] = acc / 2.0
    return s


def series_compose(outer: Sequence[complex], inner: Sequence[complex], length: int) -> np.ndarray:
    """outer(inner(x)) for inner(0) = 0, by Horner's scheme."""
    if abs(inner[0]) > 1e-14:
        raise ValueError("series_compose needs inner(0) = 0")
    out = np.zeros(length, dtype=complex)
    for c in reversed(list(outer[:length])):
        out = series_mul(out, inner, length)
        out[0] += c
    return out


def series_revert(a: Sequence[complex], length: int) -> np.ndarray:
    """Compositional inverse of a(x) = a₁x + a₂x² + … (a₀ = 0, a₁ ≠ 0)."""
    a = np.asarray(list(a) + [0] * length, dtype=complex)[:length]
    if abs(a[0]) > 1e-14 or abs(a[1]) == 0:
        raise ValueError("series_revert needs a(0) = 0 and a'(0) != 0")
    b = np.zeros(length, dtype=complex)
    b[1] = 1.0 / a[1]
    for n in range(2, length):
        composed = series_compose(a, b, n + 1)
        b[n] = -composed[n] / a[1]
    return b
