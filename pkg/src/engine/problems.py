"""
Named problem families with their closed forms.

- modified Bessel / Airy–Lucas: P = x² - 1, Q = x, R = -ν²  (K_ν, roots ±1, τ = 1/2)
- triangular cantilever: P = x⁴ - ω², Q = 2x³  (universal solution (ζ⁴ - ω²)^{-1/2})
- degenerate cubic: P = x + q, Q = 1/3  (e^{-qz} z^{-1/3}, the u³ + q thimble)
"""
import cmath
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from numpy.polynomial import chebyshev as cheb

from src.engine.ode import Level1Operator
from src.engine.oracles import bessel_k, hyp2f1
from src.engine.plane import (
    PanelGrid,
    Ray,
    RayGridFunction,
    VolterraOperator,
    continuous_power,
    volterra_apply,
)
from src.engine.series import gamma
from src.engine.thimble import ThimbleSpec

Number = Union[int, float, Fraction]


def _as_order(order: Union[Number, str]) -> Union[Fraction, float]:
    if isinstance(order, str):
        return Fraction(order)
    if isinstance(order, (int, Fraction)):
        return Fraction(order)
    return float(order)


def bessel_operator(order: Union[Number, str]) -> Level1Operator:
    nu = _as_order(order)
    one = Fraction(1) if isinstance(nu, Fraction) else 1.0
    zero = one * 0
    return Level1Operator(P=(-one, zero, one), Q=(zero, one), R=(-nu * nu,), name=f"bessel[{order}]")


def cantilever_operator(omega: Number = 1) -> Level1Operator:
    w = _as_order(omega)
    one = Fraction(1) if isinstance(w, Fraction) else 1.0
    zero = one * 0
    return Level1Operator(P=(-w * w, zero, zero, zero, one), Q=(zero, zero, zero, 2 * one),
                          name=f"cantilever[{omega}]")


def degenerate_cubic_operator(q: Number = 0) -> Level1Operator:
    q = _as_order(q)
    one = Fraction(1) if isinstance(q, Fraction) else 1.0
    return Level1Operator(P=(q, one), Q=(one / 3,), name=f"cubic[{q}]")


def airy_lucas_phase(n: int = 3) -> List[Fraction]:
    """Chebyshev T_n in the power basis (4u³ - 3u for n = 3)."""
    coeffs = cheb.cheb2poly([0] * n + [1])
    return [Fraction(int(round(c))) for c in coeffs]


def bessel_poincare_coefficient(order: Union[Number, str], alpha: int, k: int) -> Fraction:
    """(-α/2)^k (1/2 - ν)_k (1/2 + ν)_k / k!"""
    nu = Fraction(order) if not isinstance(order, float) else Fraction(order).limit_denominator(10 ** 6)
    a, b = Fraction(1, 2) - nu, Fraction(1, 2) + nu
    out = Fraction(1)
    for j in range(k):
        out *= (a + j) * (b + j) / (j + 1) * Fraction(-alpha, 2)
    return out


def bessel_position_solution(order: Number, alpha: int, zeta_alpha: Sequence[complex]) -> np.ndarray:
    """ζ_α^{-1/2}/Γ(1/2) ₂F₁(1/2 - ν, 1/2 + ν; 1/2; -α ζ_α/2), the Borel transform of the normalised W̃_α."""
    nu = float(order)
    zeta = np.asarray(zeta_alpha, dtype=complex)
    f = np.array([hyp2f1(0.5 - nu, 0.5 + nu, 0.5, -alpha * w / 2.0).value for w in zeta.ravel()])
    return (zeta.ravel() ** -0.5 / complex(gamma(0.5)).real * f).reshape(zeta.shape)


def k0_integrand(length: float = 48.0, panel_length: float = 2.0, n: int = 32) -> RayGridFunction:
    """(ζ² - 1)^{-1/2} on the ray from 1 along ℝ₊; its Laplace transform is K_0."""
    ray = Ray(1.0, 0.0, length)
    grid = PanelGrid.uniform(length, panel_length, n)
    return RayGridFunction.from_smooth(ray, -0.5, grid, lambda t: (t + 2.0) ** -0.5 + 0j)


def cantilever_universal(omega: float, alpha: complex, grid: PanelGrid) -> RayGridFunction:
    """(ζ⁴ - ω²)^{-1/2} on the ray from α in the direction arg α, continued along the ray."""
    alpha = complex(alpha)
    ray = Ray(alpha, cmath.phase(alpha), grid.length)
    t = grid.nodes
    zeta = ray.point(t)
    smooth = continuous_power((zeta ** 4 - omega ** 2) / t, -0.5)
    return RayGridFunction(ray, -0.5, grid, smooth)


def cantilever_residual(omega: float, alpha: complex, t_lo: float = 0.05, t_hi: float = 3.0,
                        samples: int = 60) -> float:
    """sup |𝒫̂_α v| over [t_lo, t_hi] for the universal solution v on the ray from α."""
    V = VolterraOperator.at(cantilever_operator(omega), alpha)
    grid = PanelGrid.uniform(t_hi + 1.0, 0.5, 32)
    residual = volterra_apply(V, cantilever_universal(float(omega), complex(V.base), grid))
    t = np.linspace(t_lo, t_hi, samples)
    return float(np.max(np.abs(residual.value_at(t))))


# ==================== problem descriptors ====================

@dataclass(frozen=True)
class OdeProblem:
    name: str
    operator: Level1Operator
    alpha: complex
    theta: Optional[float] = None
    reference: Optional[Callable[[complex], complex]] = field(default=None, compare=False)
    reference_name: str = ""


@dataclass(frozen=True)
class ThimbleProblem:
    name: str
    spec: ThimbleSpec
    allow_degenerate: bool = False


def bessel_problem(order: Union[Number, str] = Fraction(1, 3), alpha: int = 1) -> OdeProblem:
    nu = _as_order(order)
    reference = None
    if alpha == 1:
        def reference(z: complex) -> complex:
            return bessel_k(float(nu), z).value
    return OdeProblem(
        name=f"bessel[{order}]@{alpha}",
        operator=bessel_operator(nu),
        alpha=complex(alpha),
        theta=0.0 if alpha == 1 else cmath.pi,
        reference=reference,
        reference_name="bessel_k" if reference else "",
    )


def cubic_thimble_problem(crit_point: float = 0.5, theta: float = cmath.pi / 8) -> ThimbleProblem:
    spec = ThimbleSpec(f=tuple(airy_lucas_phase(3)), g=(1,), crit_point=crit_point, angle=theta)
    return ThimbleProblem(name=f"airy_lucas_cubic@{crit_point}", spec=spec)


def degenerate_cubic_problem(q: float = 0.0, theta: float = 0.0) -> ThimbleProblem:
    spec = ThimbleSpec(f=(q, 0, 0, 1), g=(1,), crit_point=0, angle=theta)
    return ThimbleProblem(name=f"degenerate_cubic[{q}]", spec=spec, allow_degenerate=True)
