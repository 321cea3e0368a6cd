"""
Frequency-side front end for level-1 operators

    𝒫 = P(∂_z) + z^{-1} Q(∂_z) + z^{-2} R(z^{-1}),

with characteristic data and Poincaré formal solutions.
"""
import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from src.engine import polynomial as poly
from src.engine.errors import DegenerateQ, InvalidOperator, NonSimpleRoots, ResonanceError
from src.engine.series import Scalar, ShiftedSeries, TransMonomial, is_exact
from src.logging_config import get_logger

logger = get_logger("borelsum.ode")

ROOT_SEPARATION = 1e-8
Q_DEGENERACY = 1e-10
EXACT_DENOMINATOR = 10 ** 6


def _coerce_coeffs(values: Sequence[Any]) -> Tuple[Scalar, ...]:
    values = [Fraction(v) if isinstance(v, str) else v for v in values]
    if all(is_exact(v) for v in values):
        return tuple(Fraction(v) for v in values)
    return tuple(complex(v) for v in values)


@dataclass(frozen=True)
class Level1Operator:
    """P monic of degree d >= 1, deg Q <= d - 1, R a frequency series in z^{-1}"""
    P: Tuple[Scalar, ...]
    Q: Tuple[Scalar, ...]
    R: Tuple[Scalar, ...] = (0,)
    name: str = ""

    def __post_init__(self):
        P = poly.trim(_coerce_coeffs(self.P))
        Q = poly.trim(_coerce_coeffs(self.Q or (0,)))
        R = _coerce_coeffs(self.R or (0,))
        if len(P) < 2:
            raise InvalidOperator("P must have degree >= 1", {"P": [str(c) for c in P]})
        if abs(complex(P[-1]) - 1) > 1e-12:
            raise InvalidOperator("P must be monic", {"leading": str(P[-1])})
        if len(Q) > len(P) - 1:
            raise InvalidOperator("deg Q must be below deg P", {"deg_P": len(P) - 1, "deg_Q": len(Q) - 1})
        object.__setattr__(self, "P", tuple(P))
        object.__setattr__(self, "Q", tuple(Q))
        object.__setattr__(self, "R", tuple(R))

    @property
    def degree(self) -> int:
        return len(self.P) - 1

    @property
    def exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self.P + self.Q + self.R)

    @property
    def R_series(self) -> ShiftedSeries:
        return ShiftedSeries.frequency(Fraction(0) if self.exact else 0.0, self.R)

    @property
    def last_r_index(self) -> Optional[int]:
        nonzero = [j for j, c in enumerate(self.R) if c != 0]
        return nonzero[-1] if nonzero else None

    def p(self, zeta):
        """Position-side symbol p(ζ) = P(-ζ)."""
        return poly.evaluate(self.P, -zeta)

    def q(self, zeta):
        return poly.evaluate(self.Q, -zeta)

    def to_dict(self) -> dict:
        def fmt(c):
            return str(c) if isinstance(c, Fraction) else _format_complex(c)
        return {
            "name": self.name,
            "P": [fmt(c) for c in self.P],
            "Q": [fmt(c) for c in self.Q],
            "R": [fmt(c) for c in self.R],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Level1Operator":
        def parse(c):
            if isinstance(c, (list, tuple)):
                return complex(c[0], c[1])
            return c
        return cls(
            P=tuple(parse(c) for c in data["P"]),
            Q=tuple(parse(c) for c in data.get("Q", [0])),
            R=tuple(parse(c) for c in data.get("R", [0])),
            name=data.get("name", ""),
        )


def _format_complex(c: Any) -> Any:
    c = complex(c)
    return c.real if c.imag == 0 else [c.real, c.imag]


@dataclass(frozen=True)
class CharacteristicDatum:
    """α with P(-α) = 0, τ = Q(-α)/P'(-α), and the directions from α to the other roots"""
    alpha: Scalar
    tau: Scalar
    forbidden_directions: Tuple[float, ...] = field(default_factory=tuple)

    @property
    def alpha_c(self) -> complex:
        return complex(self.alpha)

    @property
    def tau_real(self) -> float:
        return complex(self.tau).real

    def to_dict(self) -> dict:
        return {
            "alpha": [complex(self.alpha).real, complex(self.alpha).imag],
            "tau": str(self.tau) if isinstance(self.tau, Fraction) else _format_complex(self.tau),
            "forbidden_directions": list(self.forbidden_directions),
        }


# ==================== characteristic data ====================

def characteristic_roots(op: Level1Operator) -> List[CharacteristicDatum]:
    """All α with P(-α) = 0, sorted by (Re α, Im α)."""
    xs = poly.roots_polished(op.P)
    scale = max(1.0, float(np.max(np.abs(xs))))
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            if abs(xs[i] - xs[j]) <= ROOT_SEPARATION * scale:
                raise NonSimpleRoots(
                    "characteristic polynomial has a repeated root",
                    {"root": [xs[i].real, xs[i].imag], "separation": float(abs(xs[i] - xs[j]))},
                )

    alphas = sorted((-x for x in xs), key=lambda a: (round(a.real, 12), round(a.imag, 12)))
    dP = poly.derivative(op.P)
    q_scale = poly.scale_of(op.Q)
    data = []
    for alpha in alphas:
        q_val = complex(poly.evaluate(op.Q, -alpha))
        if abs(q_val) <= Q_DEGENERACY * q_scale * scale ** max(len(op.Q) - 1, 0):
            raise DegenerateQ("Q vanishes at a characteristic root",
                              {"alpha": [alpha.real, alpha.imag]})
        exact_alpha = _rationalize_root(op, alpha) if op.exact else None
        if exact_alpha is not None:
            tau = poly.evaluate(op.Q, -exact_alpha) / poly.evaluate(dP, -exact_alpha)
            alpha_value: Scalar = exact_alpha
        else:
            tau = q_val / complex(poly.evaluate(dP, -alpha))
            if abs(tau.imag) <= 1e-10 * max(1.0, abs(tau)):
                tau = tau.real
            alpha_value = complex(alpha)
        forbidden = tuple(
            cmath.phase(other - alpha) for other in alphas if abs(other - alpha) > 0
        )
        data.append(CharacteristicDatum(alpha_value, tau, forbidden))
        logger.debug_with("characteristic root", alpha=[alpha.real, alpha.imag], tau=str(tau))
    return data


def _rationalize_root(op: Level1Operator, alpha: complex) -> Optional[Fraction]:
    if abs(alpha.imag) > 1e-12:
        return None
    candidate = Fraction(alpha.real).limit_denominator(EXACT_DENOMINATOR)
    if poly.evaluate(op.P, -candidate) == 0:
        return candidate
    return None


def datum_for(op: Level1Operator, alpha: complex) -> CharacteristicDatum:
    """The characteristic datum whose α is closest to ``alpha``."""
    data = characteristic_roots(op)
    return min(data, key=lambda d: abs(complex(d.alpha) - complex(alpha)))


def default_direction(datum: CharacteristicDatum) -> float:
    """A ray angle from α that keeps the widest clearance from the forbidden directions."""
    candidates = [0.0, math.pi / 2, math.pi, -math.pi / 2]
    if abs(complex(datum.alpha)) > 0:
        candidates.insert(0, cmath.phase(complex(datum.alpha)))
    if not datum.forbidden_directions:
        return candidates[0]

    def clearance(theta: float) -> float:
        return min(abs(cmath.phase(cmath.exp(1j * (theta - f)))) for f in datum.forbidden_directions)

    return max(candidates, key=clearance)


# ==================== Poincaré recurrence ====================

def _shift_down(v: List[Scalar], alpha: Scalar, tau: Scalar, zero: Scalar) -> List[Scalar]:
    """∂_z on coefficients over the basis e^{-αz} z^{-τ-k}."""
    out = [zero] * len(v)
    for k in range(len(v)):
        out[k] = -alpha * v[k]
        if k >= 1:
            out[k] -= (tau + k - 1) * v[k - 1]
    return out


def _apply_poly(coeffs: Sequence[Scalar], v: List[Scalar], alpha, tau, zero) -> List[Scalar]:
    acc = [coeffs[-1] * x for x in v]
    for c in reversed(coeffs[:-1]):
        acc = _shift_down(acc, alpha, tau, zero)
        acc = [a + c * x for a, x in zip(acc, v)]
    return acc


def _shift_order(v: List[Scalar], by: int, zero: Scalar) -> List[Scalar]:
    return ([zero] * by + v)[: len(v)]


def apply_operator(op: Level1Operator, t: TransMonomial, rows: Optional[int] = None) -> List[Scalar]:
    """Coefficients of 𝒫 t on e^{-αz} z^{-τ-k}, k < rows (default N + 2)."""
    exact = op.exact and t.series.exact and is_exact(t.alpha) and is_exact(t.tau)
    zero: Scalar = Fraction(0) if exact else 0j
    rows = rows or t.truncation_order + 2
    v = [c for c in t.coeffs][:rows] + [zero] * max(0, rows - len(t.coeffs))
    alpha = t.alpha if exact else complex(t.alpha)
    tau = t.tau if exact else complex(t.tau)
    out = _apply_poly(op.P, v, alpha, tau, zero)
    q_part = _shift_order(_apply_poly(op.Q, v, alpha, tau, zero), 1, zero)
    out = [a + b for a, b in zip(out, q_part)]
    for j, r in enumerate(op.R):
        if r == 0 or j + 2 >= rows:
            continue
        shifted = _shift_order(v, j + 2, zero)
        out = [a + r * b for a, b in zip(out, shifted)]
    return out


def poincare_solution(
    op: Level1Operator,
    datum: CharacteristicDatum,
    N: int,
    c0: Scalar = 1,
) -> TransMonomial:
    """
    e^{-αz} z^{-τ} (c0 + c1 z^{-1} + ... + cN z^{-N}) annihilated by 𝒫 through order z^{-τ-N-1}.

    𝒫 acts on the monomial basis as a lower-triangular matrix whose subdiagonal is
    -k P'(-α); the coefficients follow by forward substitution. Exact when the
    operator, α, τ and c0 are rational.
    """
    if N < 1:
        raise ValueError("poincare_solution needs N >= 1")
    if c0 == 0:
        raise ValueError("c0 must be nonzero")
    exact = op.exact and is_exact(datum.alpha) and is_exact(datum.tau) and is_exact(c0)
    zero: Scalar = Fraction(0) if exact else 0j
    alpha = Fraction(datum.alpha) if exact else complex(datum.alpha)
    tau = Fraction(datum.tau) if exact else complex(datum.tau)
    size = N + 2

    columns = []
    for j in range(N + 1):
        basis = [zero] * size
        basis[j] = Fraction(1) if exact else 1.0 + 0j
        trial = TransMonomial(alpha, tau, ShiftedSeries.frequency(zero if exact else 0, basis))
        columns.append(apply_operator(op, trial, size))

    scale = max(1.0, max(abs(complex(col[j + 1])) for j, col in enumerate(columns) if j + 1 < size))
    coeffs: List[Scalar] = [Fraction(c0) if exact else complex(c0)]
    for k in range(1, N + 1):
        pivot = columns[k][k + 1]
        if pivot == 0 or (not exact and abs(complex(pivot)) < 1e-14 * scale):
            raise ResonanceError(f"zero pivot at order {k}", {"order": k})
        acc = zero
        for j in range(k):
            acc += columns[j][k + 1] * coeffs[j]
        coeffs.append(-acc / pivot)

    tau_out = tau if exact else datum.tau
    result = TransMonomial(datum.alpha, tau_out,
                           ShiftedSeries.frequency(Fraction(0) if exact else 0.0, coeffs))
    logger.debug_with("poincare solution", order=N, exact=exact, c1=str(coeffs[1]))
    return result
