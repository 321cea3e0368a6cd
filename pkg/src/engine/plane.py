"""
Position-domain machinery on rays ζ = α + t e^{iθ}.

A function on a ray is stored as ψ(ζ(t)) = t^σ h(t) with h sampled at Chebyshev
points on panels. The phase e^{iθσ} of ζ_α^σ is carried inside h, so the explicit
factor is always the real power t^σ.
"""
import cmath
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import solve_ivp

from src.config import EngineSettings, get_settings
from src.engine import polynomial as poly
from src.engine.errors import (
    IllConditioned,
    InvalidOperator,
    NoConvergence,
    RayHitsRoot,
    RayMisconfigured,
)
from src.engine.ode import CharacteristicDatum, Level1Operator, characteristic_roots
from src.engine.quadrature import (
    chebyshev_coefficients,
    chebyshev_derivatives,
    chebyshev_nodes,
    differentiation_matrix,
    endpoint_derivative_weights,
    gauss_jacobi_unit,
    gauss_legendre_unit,
    interpolation_matrix,
)
from src.engine.series import ShiftedSeries, gamma
from src.logging_config import get_logger

logger = get_logger("borelsum.plane")

ROOT_CLEARANCE = 1e-6
MAX_TAYLOR_ORDER = 12
AMPLIFICATION_LIMIT = 1e6
CHOP_LEVEL = 1e-13


# ==================== rays and grids ====================

@dataclass(frozen=True)
class Ray:
    base: complex
    angle: float
    length: float

    def __post_init__(self):
        object.__setattr__(self, "base", complex(self.base))
        if self.length <= 0:
            raise ValueError("ray length must be positive")

    @property
    def direction(self) -> complex:
        return cmath.exp(1j * self.angle)

    def point(self, t):
        return self.base + np.asarray(t) * self.direction

    def distance_to(self, point: complex) -> float:
        offset = (complex(point) - self.base) / self.direction
        t = min(max(offset.real, 0.0), self.length)
        return abs(complex(point) - (self.base + t * self.direction))

    def with_length(self, length: float) -> "Ray":
        return Ray(self.base, self.angle, length)

    def to_dict(self) -> dict:
        return {"base": [self.base.real, self.base.imag], "angle": self.angle, "length": self.length}


@dataclass(frozen=True)
class PanelGrid:
    """Panel edges on [0, T] with n first-kind Chebyshev points per panel"""
    edges: Tuple[float, ...]
    n: int = 32

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        if len(edges) < 2 or edges[0] != 0.0 or any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("panel edges must start at 0 and increase")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def uniform(cls, length: float, panel_length: float = 1.0, n: int = 32) -> "PanelGrid":
        count = max(1, int(math.ceil(length / panel_length - 1e-12)))
        return cls(tuple(np.linspace(0.0, length, count + 1)), n)

    @classmethod
    def refined(
        cls,
        length: float,
        center: float,
        radius: float,
        panel_length: float = 1.0,
        fine_length: float = 0.25,
        n: int = 32,
    ) -> "PanelGrid":
        """Uniform panels with a finer band over [center - radius, center + radius]."""
        lo, hi = max(center - radius, 0.0), min(center + radius, length)
        edges: List[float] = [0.0]
        for a, b, step in ((0.0, lo, panel_length), (lo, hi, fine_length), (hi, length, panel_length)):
            if b - a <= 1e-12:
                continue
            count = max(1, int(math.ceil((b - a) / step - 1e-12)))
            edges.extend(np.linspace(a, b, count + 1)[1:])
        return cls(tuple(edges), n)

    @property
    def length(self) -> float:
        return self.edges[-1]

    @property
    def panel_count(self) -> int:
        return len(self.edges) - 1

    @cached_property
    def nodes(self) -> np.ndarray:
        """(panels, n) array of t-values."""
        x = chebyshev_nodes(self.n)
        e = np.asarray(self.edges)
        a, b = e[:-1, None], e[1:, None]
        return a + (b - a) * (x[None, :] + 1.0) / 2.0

    @property
    def flat_nodes(self) -> np.ndarray:
        return self.nodes.ravel()

    def locate(self, t) -> np.ndarray:
        idx = np.searchsorted(np.asarray(self.edges), np.atleast_1d(t), side="right") - 1
        return np.clip(idx, 0, self.panel_count - 1)

    def reference(self, t, panel) -> np.ndarray:
        e = np.asarray(self.edges)
        a, b = e[panel], e[panel + 1]
        return 2.0 * (np.atleast_1d(t) - a) / (b - a) - 1.0

    def to_dict(self) -> dict:
        return {"edges": list(self.edges), "nodes_per_panel": self.n}


# ==================== grid functions ====================

@dataclass(frozen=True, eq=False)
class RayGridFunction:
    """ψ(α + t e^{iθ}) = t^σ h(t); ``values`` holds h at the grid nodes, shape (panels, n)"""
    ray: Ray
    exponent: float
    grid: PanelGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex).reshape(self.grid.panel_count, self.grid.n)
        object.__setattr__(self, "values", values)
        if self.exponent <= -1:
            raise ValueError(f"endpoint exponent must exceed -1, got {self.exponent}")

    # ---------- construction ----------

    @classmethod
    def from_smooth(
        cls, ray: Ray, exponent: float, grid: PanelGrid, smooth: Callable[[np.ndarray], np.ndarray]
    ) -> "RayGridFunction":
        return cls(ray, exponent, grid, smooth(grid.nodes))

    @classmethod
    def from_callable(
        cls, ray: Ray, exponent: float, grid: PanelGrid, func: Callable[[np.ndarray], np.ndarray]
    ) -> "RayGridFunction":
        """Sample ψ(ζ) directly and divide out t^σ."""
        t = grid.nodes
        return cls(ray, exponent, grid, func(ray.point(t)) / t ** exponent)

    @classmethod
    def zeros(cls, ray: Ray, exponent: float, grid: PanelGrid) -> "RayGridFunction":
        return cls(ray, exponent, grid, np.zeros((grid.panel_count, grid.n), dtype=complex))

    def with_values(self, values: np.ndarray, exponent: Optional[float] = None) -> "RayGridFunction":
        return RayGridFunction(self.ray, self.exponent if exponent is None else exponent, self.grid, values)

    # ---------- arithmetic ----------

    def _check_compatible(self, other: "RayGridFunction"):
        if other.grid != self.grid or abs(other.exponent - self.exponent) > 1e-14 or other.ray != self.ray:
            raise ValueError("grid functions live on different rays, grids or exponents")

    def __add__(self, other: "RayGridFunction") -> "RayGridFunction":
        self._check_compatible(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "RayGridFunction") -> "RayGridFunction":
        self._check_compatible(other)
        return self.with_values(self.values - other.values)

    def scaled(self, factor: complex) -> "RayGridFunction":
        return self.with_values(self.values * factor)

    def moment(self, k: int) -> "RayGridFunction":
        """(-ζ)^k ψ"""
        zeta = self.ray.point(self.grid.nodes)
        return self.with_values(self.values * (-zeta) ** k)

    # ---------- evaluation ----------

    @property
    def zeta_nodes(self) -> np.ndarray:
        return self.ray.point(self.grid.nodes)

    def position_values(self) -> np.ndarray:
        return self.grid.nodes ** self.exponent * self.values

    def smooth_at(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        panels = self.grid.locate(t)
        out = np.empty(t.shape, dtype=complex)
        for p in np.unique(panels):
            mask = panels == p
            rows = interpolation_matrix(self.grid.n, self.grid.reference(t[mask], p))
            out[mask] = rows @ self.values[p]
        return out

    def value_at(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return t ** self.exponent * self.smooth_at(t)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def panel_coefficients(self, panel: int) -> np.ndarray:
        return chebyshev_coefficients(self.values[panel])

    def derivatives_at(self, t: float, order: int) -> np.ndarray:
        """[ψ, ψ', ..., ψ^{(order)}] at ζ(t), derivatives taken in ζ."""
        panel = int(self.grid.locate(t)[0])
        a, b = self.grid.edges[panel], self.grid.edges[panel + 1]
        x = float(self.grid.reference(t, panel)[0])
        dh = chebyshev_derivatives(self.panel_coefficients(panel), x, order)
        dh = dh * (2.0 / (b - a)) ** np.arange(order + 1)
        return _product_rule(self.exponent, t, dh, self.ray.angle, order)

    def growth_rate(self) -> float:
        """Least-squares slope of log|h| over the last quarter of the ray."""
        t = self.grid.flat_nodes
        h = np.abs(self.values.ravel())
        keep = t >= 0.75 * self.grid.length
        if keep.sum() < 2 or np.any(h[keep] == 0):
            return 0.0
        slope, _ = np.polyfit(t[keep], np.log(h[keep]), 1)
        return float(slope)

    # ---------- serialization ----------

    def to_dict(self) -> dict:
        panels = []
        for p in range(self.grid.panel_count):
            panels.append({
                "t0": self.grid.edges[p],
                "t1": self.grid.edges[p + 1],
                "values": [[v.real, v.imag] for v in self.values[p]],
            })
        return {
            "base": [self.ray.base.real, self.ray.base.imag],
            "angle": self.ray.angle,
            "exponent": self.exponent,
            "panels": panels,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RayGridFunction":
        panels = data["panels"]
        edges = [panels[0]["t0"]] + [p["t1"] for p in panels]
        grid = PanelGrid(tuple(edges), len(panels[0]["values"]))
        ray = Ray(complex(*data["base"]), data["angle"], edges[-1])
        values = np.array([[complex(*v) for v in p["values"]] for p in panels])
        return cls(ray, data["exponent"], grid, values)


def _product_rule(sigma: float, t: float, dh: np.ndarray, angle: float, order: int) -> np.ndarray:
    out = np.zeros(order + 1, dtype=complex)
    for k in range(order + 1):
        acc = 0j
        for i in range(k + 1):
            falling = 1.0
            for j in range(i):
                falling *= sigma - j
            acc += math.comb(k, i) * falling * t ** (sigma - i) * dh[k - i]
        out[k] = acc * cmath.exp(-1j * k * angle)
    return out


def continuous_power(values: np.ndarray, exponent: float) -> np.ndarray:
    """values^exponent with the argument unwrapped along the sample order."""
    values = np.asarray(values, dtype=complex)
    shape = values.shape
    flat = values.ravel()
    arg = np.unwrap(np.angle(flat))
    return (np.abs(flat) ** exponent * np.exp(1j * exponent * arg)).reshape(shape)


# ==================== fractional integrals ====================

@lru_cache(maxsize=64)
def _fractional_matrix(grid: PanelGrid, sigma: float, nu: float) -> np.ndarray:
    """
    Real matrix F with (F h)(t) = t^{-σ-ν} ∫_0^t (t-s)^{ν-1} s^σ h(s) ds at every node.

    Whole panels before the target use Gauss–Legendre (Gauss–Jacobi with weight s^σ
    on the first panel); the piece ending at the target uses Gauss–Jacobi against
    (t-s)^{ν-1}. For fractional ν a target close to its panel's left edge absorbs the
    previous panel so the kernel stays smooth on every whole panel.
    """
    n = grid.n
    q = n
    edges = np.asarray(grid.edges)
    targets = grid.flat_nodes
    size = targets.size
    F = np.zeros((size, grid.panel_count, n))

    gl_x, gl_w = gauss_legendre_unit(q)
    gl_rows = interpolation_matrix(n, 2.0 * gl_x - 1.0)
    head_x, head_w = gauss_jacobi_unit(q, 0.0, sigma)
    head_rows = interpolation_matrix(n, 2.0 * head_x - 1.0)
    tail_x, tail_w = gauss_jacobi_unit(q, nu - 1.0, 0.0)
    solo_x, solo_w = gauss_jacobi_unit(q, nu - 1.0, sigma)
    integer_nu = abs(nu - round(nu)) < 1e-12

    panels_of = grid.locate(targets)
    for row, (t, p) in enumerate(zip(targets, panels_of)):
        start_panel = int(p)
        if not integer_nu and p >= 1 and t - edges[p] < 0.5 * (edges[p + 1] - edges[p]):
            start_panel = int(p) - 1

        if start_panel == 0:
            s = t * solo_x
            w = solo_w * t ** (sigma + nu)
            _scatter(F[row], grid, s, w)
        else:
            e1 = edges[1]
            s = e1 * head_x
            w = head_w * e1 ** (sigma + 1.0) * (t - s) ** (nu - 1.0)
            F[row, 0] += w @ head_rows
            for k in range(1, start_panel):
                a, b = edges[k], edges[k + 1]
                s = a + (b - a) * gl_x
                w = (b - a) * gl_w * (t - s) ** (nu - 1.0) * s ** sigma
                F[row, k] += w @ gl_rows
            start = edges[start_panel]
            length = t - start
            s = start + length * tail_x
            w = tail_w * length ** nu * s ** sigma
            _scatter(F[row], grid, s, w)
        F[row] *= t ** (-(sigma + nu))

    F = F.reshape(size, size)
    F.setflags(write=False)
    logger.debug_with("fractional matrix", panels=grid.panel_count, sigma=sigma, nu=nu)
    return F


def _scatter(row: np.ndarray, grid: PanelGrid, s: np.ndarray, w: np.ndarray):
    panels = grid.locate(s)
    for p in np.unique(panels):
        mask = panels == p
        rows = interpolation_matrix(grid.n, grid.reference(s[mask], p))
        row[p] += w[mask] @ rows


def fractional_matrix(grid: PanelGrid, sigma: float, nu: float, angle: float) -> np.ndarray:
    """Complex matrix of ∂^{-ν} acting on smooth factors at exponent σ (result at σ + ν)."""
    F = _fractional_matrix(grid, round(float(sigma), 14), round(float(nu), 14))
    return cmath.exp(1j * angle * nu) / complex(gamma(nu)) * F


def fractional_integral(f: RayGridFunction, nu: float) -> RayGridFunction:
    """Riemann–Liouville integral ∂^{-ν}_{ζ,α} f; the exponent grows by ν."""
    if nu <= 0:
        raise ValueError("fractional_integral needs nu > 0")
    if f.exponent <= -1:
        raise ValueError("fractional_integral needs exponent > -1")
    matrix = fractional_matrix(f.grid, f.exponent, nu, f.ray.angle)
    values = matrix @ f.values.ravel()
    return f.with_values(values, exponent=f.exponent + nu)


# ==================== the Volterra operator ====================

@dataclass(frozen=True)
class VolterraOperator:
    """𝒫̂_α = p + ∂^{-1}∘q + ∂^{-2}∘R(∂^{-1}) with p(ζ) = P(-ζ), q(ζ) = Q(-ζ)"""
    op: Level1Operator
    base: complex
    tau: complex = field(default=0j, compare=False)
    others: Tuple[complex, ...] = field(default_factory=tuple, compare=False)

    @classmethod
    def at(cls, op: Level1Operator, alpha: complex) -> "VolterraOperator":
        data = characteristic_roots(op)
        datum = min(data, key=lambda d: abs(complex(d.alpha) - complex(alpha)))
        if abs(complex(datum.alpha) - complex(alpha)) > 1e-8 * max(1.0, abs(complex(alpha))):
            raise InvalidOperator(f"{alpha} is not a characteristic root",
                                  {"alpha": [complex(alpha).real, complex(alpha).imag]})
        return cls.from_datum(op, datum)

    @classmethod
    def from_datum(cls, op: Level1Operator, datum: CharacteristicDatum) -> "VolterraOperator":
        others = tuple(complex(d.alpha) for d in characteristic_roots(op)
                       if abs(complex(d.alpha) - complex(datum.alpha)) > 1e-12)
        return cls(op, complex(datum.alpha), complex(datum.tau), others)

    @cached_property
    def p_coeffs(self) -> np.ndarray:
        return poly.as_complex(poly.reflect(self.op.P))

    @cached_property
    def q_coeffs(self) -> np.ndarray:
        return poly.as_complex(poly.reflect(self.op.Q))

    @cached_property
    def p_deflated(self) -> np.ndarray:
        """p(ζ)/(ζ - α)"""
        quotient, _ = npoly.polydiv(self.p_coeffs, np.array([-self.base, 1.0]))
        return np.atleast_1d(quotient)

    @cached_property
    def n_deflated(self) -> np.ndarray:
        """(q + τ p̃)/(ζ - α); exact division since q(α) + τ p̃(α) = 0."""
        numerator = npoly.polyadd(self.q_coeffs, self.tau * self.p_deflated)
        quotient, _ = npoly.polydiv(numerator, np.array([-self.base, 1.0]))
        return np.atleast_1d(quotient)

    @property
    def r_terms(self) -> List[Tuple[int, complex]]:
        return [(j, complex(r)) for j, r in enumerate(self.op.R) if r != 0]

    def check_ray(self, ray: Ray):
        for beta in self.others:
            if ray.distance_to(beta) < ROOT_CLEARANCE * max(1.0, abs(beta)):
                raise RayHitsRoot(
                    "ray passes through another characteristic root",
                    {"root": [beta.real, beta.imag], "angle": ray.angle},
                )


def volterra_apply(V: VolterraOperator, psi: RayGridFunction) -> RayGridFunction:
    """P(-ζ)ψ + ∂^{-1}[Q(-ζ)ψ] + Σ_j R_j ∂^{-2-j}ψ, returned at exponent σ + 1."""
    if abs(psi.ray.base - V.base) > 1e-12 * max(1.0, abs(V.base)):
        raise RayMisconfigured("grid function is not based at the operator's root")
    V.check_ray(psi.ray)
    grid, theta, sigma = psi.grid, psi.ray.angle, psi.exponent
    zeta = psi.zeta_nodes.ravel()
    t = grid.flat_nodes
    h = psi.values.ravel()

    out = cmath.exp(1j * theta) * npoly.polyval(zeta, V.p_deflated) * h
    out = out + fractional_matrix(grid, sigma, 1.0, theta) @ (npoly.polyval(zeta, V.q_coeffs) * h)
    for j, r in V.r_terms:
        out = out + r * t ** (1 + j) * (fractional_matrix(grid, sigma, 2.0 + j, theta) @ h)
    return psi.with_values(out, exponent=sigma + 1.0)


def prototype_solution(V: VolterraOperator, ray: Ray, grid: PanelGrid) -> RayGridFunction:
    """
    f_0 = c ζ_α^{τ-1} exp(-∫_α^ζ ñ/p̃) / p̃ with c = -P'(-α)/Γ(τ), the fixed point of
    -(1/p)∂^{-1}∘q normalised to lead with ζ_α^{τ-1}/Γ(τ).
    """
    theta = ray.angle
    tau = V.tau
    zeta = ray.point(grid.nodes).ravel()
    t = grid.flat_nodes
    pt = npoly.polyval(zeta, V.p_deflated)
    ratio = npoly.polyval(zeta, V.n_deflated) / pt
    exponent_integral = t * (fractional_matrix(grid, 0.0, 1.0, theta) @ ratio)
    d_p = complex(poly.evaluate(poly.derivative(V.op.P), -V.base))
    c = -d_p / complex(gamma(tau.real if tau.imag == 0 else tau))
    h0 = c * cmath.exp(1j * theta * (tau - 1)) * np.exp(-exponent_integral) / pt
    return RayGridFunction(ray, float((tau - 1).real), grid, h0)


def fixed_point(
    A: np.ndarray,
    b: np.ndarray,
    tol: float,
    max_iter: int,
    stall_limit: int,
    h0_norm: float = 0.0,
) -> Tuple[np.ndarray, int]:
    """
    Iterate f ← b + A f from f = b until the update drops below
    ``tol·(1 + h0_norm + |f|)``.

    Raises NoConvergence at ``max_iter`` or once the update has failed to shrink
    for ``stall_limit`` consecutive steps.
    """
    f = b.copy()
    if not np.any(b):
        return f, 0
    iterations = 0
    stalled = 0
    previous_change = math.inf
    while iterations < max_iter:
        update = b + A @ f
        change = float(np.max(np.abs(update - f)))
        f = update
        iterations += 1
        if change < tol * (1.0 + h0_norm + float(np.max(np.abs(f)))):
            return f, iterations
        ratio = change / previous_change if previous_change > 0 else math.inf
        stalled = stalled + 1 if ratio >= 1.0 else 0
        if stalled >= stall_limit or not math.isfinite(change):
            raise NoConvergence(
                "Picard iteration is not contracting",
                {"ratio": ratio, "last_change": change, "iterations": iterations},
            )
        previous_change = change
    raise NoConvergence(
        f"Picard iteration did not settle in {max_iter} steps",
        {"last_change": previous_change, "iterations": iterations},
    )


def picard_solve(
    V: VolterraOperator,
    ray: Ray,
    N_iter_max: Optional[int] = None,
    tol: Optional[float] = None,
    grid: Optional[PanelGrid] = None,
    settings: Optional[EngineSettings] = None,
) -> RayGridFunction:
    """
    Solve 𝒫̂_α ψ = 0 on ``ray`` with ψ ~ ζ_α^{τ-1}/Γ(τ).

    ψ = f_0 + f_★ where f_★ = 𝒱_★ f_0 + (𝒱_0 + 𝒱_★) f_★, 𝒱_0 = -(1/p)∂^{-1}∘q and
    𝒱_★ = -(1/p)∂^{-2}∘R(∂^{-1}), iterated without damping.
    """
    settings = settings or get_settings()
    N_iter_max = N_iter_max or settings.picard_max_iter
    tol = tol or settings.picard_tol
    if abs(ray.base - V.base) > 1e-12 * max(1.0, abs(V.base)):
        raise RayMisconfigured("ray must start at the operator's characteristic root")
    if abs(V.tau.imag) > 1e-10 or V.tau.real <= 0:
        raise InvalidOperator("the position-domain solve needs a real, positive tau",
                              {"tau": [V.tau.real, V.tau.imag]})
    V.check_ray(ray)
    grid = grid or PanelGrid.uniform(ray.length, settings.panel_length, settings.nodes_per_panel)
    if abs(grid.length - ray.length) > 1e-12:
        ray = ray.with_length(grid.length)

    theta = ray.angle
    sigma = V.tau.real - 1.0
    zeta = ray.point(grid.nodes).ravel()
    t = grid.flat_nodes
    inv_p = 1.0 / npoly.polyval(zeta, V.p_deflated)

    f0 = prototype_solution(V, ray, grid)
    v0 = -inv_p[:, None] * (fractional_matrix(grid, sigma, 1.0, 0.0)
                            * npoly.polyval(zeta, V.q_coeffs)[None, :])
    v_star = np.zeros_like(v0)
    for j, r in V.r_terms:
        block = fractional_matrix(grid, sigma, 2.0 + j, theta)
        v_star += (-cmath.exp(-1j * theta) * r) * (inv_p * t ** (1 + j))[:, None] * block
    A = v0 + v_star
    b = v_star @ f0.values.ravel()

    f, iterations = fixed_point(A, b, tol, N_iter_max, settings.picard_stall_limit, f0.sup_norm())

    psi = f0.with_values(f0.values.ravel() + f)
    residual = volterra_apply(V, psi)
    scale = max(1.0, float(np.max(np.abs(npoly.polyval(zeta, V.p_deflated) * psi.values.ravel()))))
    res_norm = float(np.max(np.abs(residual.values)))
    logger.debug_with("picard solve", iterations=iterations, residual=res_norm, scale=scale,
                      alpha=[V.base.real, V.base.imag], angle=theta, length=ray.length)
    if res_norm > settings.picard_residual_tol * scale:
        raise NoConvergence("Picard solution leaves a large residual",
                            {"residual": res_norm, "scale": scale})
    return psi


# ==================== Taylor coefficients at the base ====================

def taylor_extract(psi: RayGridFunction, M: int) -> ShiftedSeries:
    """Shifted Taylor coefficients of ψ at α from the first panel's Chebyshev interpolant."""
    if M > MAX_TAYLOR_ORDER:
        raise ValueError(f"taylor_extract supports M <= {MAX_TAYLOR_ORDER}")
    length = psi.grid.edges[1]
    a = psi.panel_coefficients(0)
    a = np.where(np.abs(a) < CHOP_LEVEL * np.max(np.abs(a)), 0.0, a) if np.any(a) else a
    sigma, theta = psi.exponent, psi.ray.angle
    coeffs = []
    a_max = float(np.max(np.abs(a))) if np.any(a) else 0.0
    for k in range(M + 1):
        terms = endpoint_derivative_weights(psi.grid.n, k) * a
        derivative = complex(np.sum(terms))
        if a_max > 0:
            amplification = float(np.sum(np.abs(terms))) / max(abs(derivative), a_max)
            if amplification > AMPLIFICATION_LIMIT:
                raise IllConditioned(
                    f"Chebyshev differentiation amplifies {amplification:.2e}× at order {k}",
                    {"order": k, "amplification": amplification},
                )
        h_k = (2.0 / length) ** k * derivative / math.factorial(k)
        coeffs.append(h_k * cmath.exp(-1j * theta * (sigma + k)))
    return ShiftedSeries.position(sigma, coeffs)


# ==================== order-shifted position equation ====================

@dataclass(frozen=True)
class PositionODE:
    """Σ C(m,i) p^{(i)} ψ^{(m-i)} + Σ C(m-1,i) q^{(i)} ψ^{(m-1-i)} + Σ R_j ψ^{(m-2-j)} = 0"""
    order: int
    p_derivs: Tuple[np.ndarray, ...]
    q_derivs: Tuple[np.ndarray, ...]
    r_terms: Tuple[Tuple[int, complex], ...]

    def terms(self, zeta, derivs: Sequence) -> List:
        m = self.order
        out = []
        for i in range(m + 1):
            out.append(math.comb(m, i) * npoly.polyval(zeta, self.p_derivs[i]) * derivs[m - i])
        for i in range(m):
            out.append(math.comb(m - 1, i) * npoly.polyval(zeta, self.q_derivs[i]) * derivs[m - 1 - i])
        for j, r in self.r_terms:
            if m - 2 - j >= 0:
                out.append(r * derivs[m - 2 - j])
        return out

    def highest(self, zeta: complex, lower: Sequence[complex]) -> complex:
        """ψ^{(m)} from ψ, ..., ψ^{(m-1)}."""
        padded = list(lower) + [0j]
        rest = sum(self.terms(zeta, padded)[1:])
        return -rest / npoly.polyval(zeta, self.p_derivs[0])


def position_ode(V: VolterraOperator) -> PositionODE:
    """The m-th derivative of 𝒫̂_α ψ = 0; m = 2 + last nonzero R index, or 1 when R = 0."""
    last = V.op.last_r_index
    m = 1 if last is None else 2 + last
    p = [V.p_coeffs]
    for _ in range(m):
        p.append(npoly.polyder(p[-1]) if len(p[-1]) > 1 else np.zeros(1, dtype=complex))
    q = [V.q_coeffs]
    for _ in range(m):
        q.append(npoly.polyder(q[-1]) if len(q[-1]) > 1 else np.zeros(1, dtype=complex))
    return PositionODE(m, tuple(p), tuple(q), tuple(V.r_terms))


def node_derivatives(psi: RayGridFunction, order: int) -> List[np.ndarray]:
    """ζ-derivatives of ψ at every node, each shaped (panels, n)."""
    d = differentiation_matrix(psi.grid.n)
    widths = np.diff(np.asarray(psi.grid.edges))[:, None]
    dh = [psi.values]
    for _ in range(order):
        dh.append((dh[-1] @ d.T) * (2.0 / widths))
    t = psi.grid.nodes
    sigma, theta = psi.exponent, psi.ray.angle
    out = []
    for k in range(order + 1):
        acc = np.zeros_like(psi.values)
        for i in range(k + 1):
            falling = 1.0
            for j in range(i):
                falling *= sigma - j
            acc = acc + math.comb(k, i) * falling * t ** (sigma - i) * dh[k - i]
        out.append(acc * cmath.exp(-1j * k * theta))
    return out


def order_shifted_residual(V: VolterraOperator, psi: RayGridFunction) -> float:
    """Relative residual of the order-shifted equation on the panels past the first."""
    eq = position_ode(V)
    if psi.grid.panel_count < 2:
        raise ValueError("order_shifted_residual needs at least two panels")
    derivs = node_derivatives(psi, eq.order)
    zeta = psi.zeta_nodes
    terms = eq.terms(zeta, derivs)
    total = sum(terms)[1:]
    scale = sum(np.abs(term) for term in terms)[1:]
    return float(np.max(np.abs(total) / np.maximum(scale, 1e-300)))


def continue_along_arc(
    V: VolterraOperator,
    psi: RayGridFunction,
    radius: float,
    angle_to: float,
    rtol: float = 1e-12,
) -> complex:
    """
    Continue ψ from ζ = α + r e^{iθ_ray} along the arc α + r e^{iφ} to φ = ``angle_to``
    by integrating the order-shifted equation.
    """
    eq = position_ode(V)
    m = eq.order
    start = psi.derivatives_at(radius, m - 1)
    angle_from = psi.ray.angle
    if abs(angle_to - angle_from) < 1e-15:
        return complex(start[0])

    def rhs(phi, y):
        zeta = V.base + radius * cmath.exp(1j * phi)
        dzeta = 1j * radius * cmath.exp(1j * phi)
        top = eq.highest(zeta, y)
        return dzeta * np.append(y[1:], top)

    scale = float(np.max(np.abs(start))) or 1.0
    sol = solve_ivp(rhs, (angle_from, angle_to), start.astype(complex), method="DOP853",
                    rtol=rtol, atol=1e-14 * scale)
    if not sol.success:
        raise NoConvergence(f"arc continuation failed: {sol.message}")
    return complex(sol.y[0, -1])
