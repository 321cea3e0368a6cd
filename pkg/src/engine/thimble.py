"""
One-dimensional thimble integrals I(z) = ∫ e^{-z f(u)} g(u) du for polynomial phases.

A thimble through a critical point a is the preimage of the ray f(a) + t e^{iθ}.
Both halves are parametrised by s with t = s^m (m = 2 at a Morse point, m = the
vanishing order of f - f(a) otherwise) and lifted from the local model
u ≈ a + c s ω^k by the path-lifting ODE du/ds = m s^{m-1} e^{iθ}/f'(u).
"""
import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import solve_ivp

from src.config import EngineSettings, get_settings
from src.engine import polynomial as poly
from src.engine.errors import (
    BranchCollision,
    DegenerateChart,
    DomainError,
    NoConvergence,
    SeedFailure,
    TailDominates,
)
from src.engine.laplace import LaplaceRequest, laplace
from src.engine.plane import PanelGrid, Ray, RayGridFunction
from src.engine.quadrature import gauss_legendre_unit
from src.engine.series import ShiftedSeries, TransMonomial, gamma, series_compose, series_mul, series_revert, series_sqrt1p
from src.logging_config import get_logger

logger = get_logger("borelsum.thimble")

DEGENERACY_TOL = 1e-10
CLUSTER_TOL = 1e-6
VALUE_CLEARANCE = 1e-8
POINT_CLEARANCE = 1e-6
SEED_PARAMETER = 1e-4
TRACE_DECAY = 36.0
DIRECT_CUTOFF = 45.0
DIRECT_PANELS = 24
MAX_SERIES_ORDER = 8


@dataclass(frozen=True)
class CriticalPoint:
    point: complex
    value: complex
    second: complex
    degenerate: bool
    order: int

    def to_dict(self) -> dict:
        return {
            "point": [self.point.real, self.point.imag],
            "value": [self.value.real, self.value.imag],
            "second": [self.second.real, self.second.imag],
            "degenerate": self.degenerate,
            "order": self.order,
        }


def _taylor_at(coeffs: Sequence[Any], a: complex) -> np.ndarray:
    """Coefficients of p(a + w) in w."""
    c = poly.as_complex(coeffs)
    out = np.zeros(len(c), dtype=complex)
    d = c
    for k in range(len(c)):
        out[k] = npoly.polyval(a, d) / math.factorial(k)
        d = npoly.polyder(d) if len(d) > 1 else np.zeros(1, dtype=complex)
    return out


def _vanishing_order(taylor: np.ndarray, scale: float) -> int:
    for k in range(2, len(taylor)):
        if abs(taylor[k]) * math.factorial(k) > DEGENERACY_TOL * scale:
            return k
    return len(taylor) - 1


def critical_data(f: Sequence[Any]) -> List[CriticalPoint]:
    """Roots of f' with values, f'' and degeneracy flags, sorted by (Re, Im)."""
    if poly.degree(f) < 2:
        raise DomainError("critical_data needs deg f >= 2", {"degree": poly.degree(f)})
    scale = poly.scale_of(f)
    roots = poly.roots_polished(poly.derivative(f))
    clusters: List[List[complex]] = []
    for r in roots:
        for cluster in clusters:
            if abs(cluster[0] - r) <= CLUSTER_TOL * max(1.0, abs(r)):
                cluster.append(complex(r))
                break
        else:
            clusters.append([complex(r)])

    out = []
    for cluster in clusters:
        a = complex(np.mean(cluster))
        taylor = _taylor_at(f, a)
        second = 2.0 * taylor[2]
        degenerate = abs(second) < DEGENERACY_TOL * scale
        out.append(CriticalPoint(
            point=a,
            value=complex(taylor[0]),
            second=complex(second),
            degenerate=bool(degenerate),
            order=_vanishing_order(taylor, scale) if degenerate else 2,
        ))
    out.sort(key=lambda c: (round(c.point.real, 12), round(c.point.imag, 12)))
    return out


# ==================== thimble specs ====================

@dataclass(frozen=True)
class ThimbleSpec:
    """Phase f and 1-form g(u) du (ascending coefficients), critical point a, ray angle θ"""
    f: Tuple[complex, ...]
    g: Tuple[complex, ...] = (1.0,)
    crit_point: complex = 0j
    angle: float = 0.0
    orientation: int = 1

    def __post_init__(self):
        object.__setattr__(self, "f", tuple(complex(c) for c in poly.trim(self.f)))
        object.__setattr__(self, "g", tuple(complex(c) for c in poly.trim(self.g or (0,))))
        object.__setattr__(self, "crit_point", complex(self.crit_point))
        object.__setattr__(self, "angle", float(self.angle))
        if self.orientation not in (1, -1):
            raise DomainError("orientation must be +1 or -1", {"orientation": self.orientation})
        if poly.degree(self.f) < 2:
            raise DomainError("the phase must have degree >= 2")
        slope = complex(poly.evaluate(poly.derivative(self.f), self.crit_point))
        if abs(slope) > 1e-8 * poly.scale_of(self.f) * max(1.0, abs(self.crit_point)) ** poly.degree(self.f):
            raise DomainError("crit_point is not a critical point of f",
                              {"crit_point": [self.crit_point.real, self.crit_point.imag],
                               "f_prime": [slope.real, slope.imag]})

    @property
    def critical_value(self) -> complex:
        return complex(poly.evaluate(self.f, self.crit_point))

    @property
    def direction(self) -> complex:
        return cmath.exp(1j * self.angle)

    def critical_point(self) -> CriticalPoint:
        return min(critical_data(self.f), key=lambda c: abs(c.point - self.crit_point))

    def others(self) -> List[CriticalPoint]:
        here = self.critical_point()
        return [c for c in critical_data(self.f) if c.point != here.point]

    def seed_scale(self) -> Tuple[complex, int]:
        """(c, m) with f(a + c s) ≈ f(a) + s^m e^{iθ}; c is the principal m-th root."""
        crit = self.critical_point()
        m = crit.order
        taylor = _taylor_at(self.f, self.crit_point)
        return (self.direction / taylor[m]) ** (1.0 / m), m

    def translated(self, shift: complex) -> "ThimbleSpec":
        """f + c; the integral picks up e^{-cz}."""
        f = list(self.f)
        f[0] += complex(shift)
        return replace(self, f=tuple(f))

    def rescaled(self, factor: complex) -> "ThimbleSpec":
        """r f on the same contour; I_{rf}(z) = I_f(rz)."""
        factor = complex(factor)
        angle = cmath.phase(cmath.exp(1j * (self.angle + cmath.phase(factor))))
        out = replace(self, f=tuple(factor * c for c in self.f), angle=angle)
        return _match_orientation(self, out, 1.0)

    def pulled_back(self, s: complex) -> "ThimbleSpec":
        """f(u/s), g(u/s) on the contour s·C; the integral is multiplied by s."""
        s = complex(s)
        out = replace(
            self,
            f=tuple(c / s ** k for k, c in enumerate(self.f)),
            g=tuple(c / s ** k for k, c in enumerate(self.g)),
            crit_point=s * self.crit_point,
        )
        return _match_orientation(self, out, s)

    def to_dict(self) -> dict:
        return {
            "f": [[c.real, c.imag] for c in self.f],
            "g": [[c.real, c.imag] for c in self.g],
            "crit_point": [self.crit_point.real, self.crit_point.imag],
            "angle": self.angle,
            "orientation": self.orientation,
        }


def _match_orientation(before: ThimbleSpec, after: ThimbleSpec, stretch: complex) -> ThimbleSpec:
    expected = stretch * before.seed_scale()[0]
    seed = after.seed_scale()[0]
    if abs(seed + expected) < abs(seed - expected):
        return replace(after, orientation=-before.orientation)
    return replace(after, orientation=before.orientation)


def check_ray(spec: ThimbleSpec, length: float = math.inf):
    """BranchCollision when the ray from f(a) passes within tolerance of another critical value."""
    base = spec.critical_value
    for other in spec.others():
        offset = (other.value - base) / spec.direction
        t = min(max(offset.real, 0.0), length)
        distance = abs(other.value - (base + t * spec.direction))
        if distance < VALUE_CLEARANCE * max(1.0, abs(other.value)):
            raise BranchCollision(
                "the ray from the critical value runs through another critical value",
                {"value": [other.value.real, other.value.imag], "angle": spec.angle},
            )


def trace_length(spec: ThimbleSpec, z_points: Sequence[complex]) -> float:
    rates = [(complex(z) * spec.direction).real for z in z_points]
    if min(rates) <= 0:
        raise DomainError("every z must satisfy Re(z e^(iθ)) > 0", {"angle": spec.angle})
    return TRACE_DECAY / min(rates)


# ==================== tracing ====================

@dataclass(frozen=True, eq=False)
class TracedThimble:
    """Outgoing (plus, k = 0) and incoming (minus, k = 1) halves u(s), t = s^m."""
    spec: ThimbleSpec
    order: int
    seed: complex
    s_start: float
    s_max: float
    solutions: Tuple[Any, Any]

    @property
    def t_max(self) -> float:
        return self.s_max ** self.order

    def root_of_unity(self, branch: int) -> complex:
        return cmath.exp(2j * math.pi * branch / self.order)

    def path(self, branch: int, s, projections: int = 2) -> np.ndarray:
        """u on ``branch`` (0 = plus, 1 = minus) at parameters s, projected onto the fibre."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        spec = self.spec
        model = spec.crit_point + self.seed * self.root_of_unity(branch) * s
        guess = model.astype(complex)
        beyond = s >= self.s_start
        if beyond.any():
            guess[beyond] = self.solutions[branch].sol(s[beyond])[0]
        f = poly.as_complex(spec.f)
        df = npoly.polyder(f)
        target = spec.critical_value + s ** self.order * spec.direction
        moving = s > 0
        for _ in range(projections):
            step = (npoly.polyval(guess[moving], f) - target[moving]) / npoly.polyval(guess[moving], df)
            guess[moving] = guess[moving] - step
        return guess

    def velocity(self, branch: int, s, u: Optional[np.ndarray] = None) -> np.ndarray:
        """du/ds."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        u = self.path(branch, s) if u is None else u
        df = npoly.polyder(poly.as_complex(self.spec.f))
        out = np.empty(s.shape, dtype=complex)
        zero = s == 0
        out[zero] = self.seed * self.root_of_unity(branch)
        out[~zero] = self.order * s[~zero] ** (self.order - 1) * self.spec.direction / npoly.polyval(u[~zero], df)
        return out

    def at_t(self, branch: int, t) -> np.ndarray:
        return self.path(branch, np.asarray(t, dtype=float) ** (1.0 / self.order))

    def residual(self, samples: int = 200) -> float:
        s = np.linspace(0.0, self.s_max, samples)
        f = poly.as_complex(self.spec.f)
        target = self.spec.critical_value + s ** self.order * self.spec.direction
        worst = 0.0
        for branch in (0, 1):
            u = self.path(branch, s)
            err = np.abs(npoly.polyval(u, f) - target) / np.maximum(1.0, np.abs(target))
            worst = max(worst, float(np.max(err)))
        return worst

    def to_polylines(self, samples: int = 200) -> Dict[str, dict]:
        s = np.linspace(0.0, self.s_max, samples)
        t = s ** self.order
        out = {}
        for name, branch in (("plus", 0), ("minus", 1)):
            u = self.path(branch, s)
            out[name] = {"t": t.tolist(), "u_re": u.real.tolist(), "u_im": u.imag.tolist()}
        return out


def _seed(spec: ThimbleSpec, c: complex, m: int, branch: int, s0: float) -> complex:
    f = poly.as_complex(spec.f)
    df = npoly.polyder(f)
    omega = cmath.exp(2j * math.pi * branch / m)
    u = spec.crit_point + c * omega * s0
    target = spec.critical_value + s0 ** m * spec.direction
    for _ in range(30):
        step = (npoly.polyval(u, f) - target) / npoly.polyval(u, df)
        u -= step
        if abs(step) < 1e-15 * max(1.0, abs(u)):
            return complex(u)
    raise SeedFailure("Newton seeding did not converge", {"branch": branch, "s0": s0})


def trace_thimble(
    spec: ThimbleSpec,
    T_max: float,
    trace_tol: Optional[float] = None,
    allow_degenerate: bool = False,
    settings: Optional[EngineSettings] = None,
) -> TracedThimble:
    settings = settings or get_settings()
    trace_tol = trace_tol or settings.trace_tol
    crit = spec.critical_point()
    if crit.degenerate and not allow_degenerate:
        raise SeedFailure("critical point is degenerate (f'' ~ 0)",
                          {"point": [crit.point.real, crit.point.imag], "order": crit.order})
    check_ray(spec, T_max)
    c, m = spec.seed_scale()
    s_max = T_max ** (1.0 / m)
    s0 = min(SEED_PARAMETER, s_max / 10.0)
    df = npoly.polyder(poly.as_complex(spec.f))
    direction = spec.direction

    def rhs(s, y):
        return m * s ** (m - 1) * direction / npoly.polyval(y, df)

    solutions = []
    for branch in (0, 1):
        u0 = _seed(spec, c, m, branch, s0)
        sol = solve_ivp(rhs, (s0, s_max), np.array([u0], dtype=complex), method="DOP853",
                        dense_output=True, rtol=1e-12, atol=1e-14 * max(1.0, abs(u0)))
        if not sol.success:
            raise NoConvergence(f"path lifting failed: {sol.message}", {"branch": branch})
        solutions.append(sol)

    traced = TracedThimble(spec, m, c, s0, s_max, tuple(solutions))
    s = np.linspace(0.0, s_max, 400)[1:]
    for other in spec.others():
        for branch in (0, 1):
            gap = float(np.min(np.abs(traced.path(branch, s) - other.point)))
            if gap < POINT_CLEARANCE * max(1.0, abs(other.point)):
                raise BranchCollision("thimble runs into another critical point",
                                      {"point": [other.point.real, other.point.imag], "branch": branch})
    drift = traced.residual()
    if drift > trace_tol:
        raise NoConvergence("traced thimble left the fibre", {"residual": drift, "tol": trace_tol})
    logger.debug_with("traced thimble", order=m, t_max=T_max, residual=drift,
                      steps=[len(sol.t) for sol in solutions])
    return traced


# ==================== integrals ====================

def thimble_integral_direct(
    spec: ThimbleSpec,
    traced: TracedThimble,
    z: complex,
    settings: Optional[EngineSettings] = None,
) -> Tuple[complex, float]:
    """(value, error) of ∫ e^{-zf(u)} g(u) du from the incoming half to the outgoing half."""
    settings = settings or get_settings()
    z = complex(z)
    rate = (z * spec.direction).real
    if rate <= 0:
        raise DomainError("Re(z e^(iθ)) must be positive", {"z": [z.real, z.imag]})
    m = traced.order
    s_end = min(traced.s_max, (DIRECT_CUTOFF / rate) ** (1.0 / m))
    f = poly.as_complex(spec.f)
    g = poly.as_complex(spec.g)

    def integrand(s: np.ndarray) -> np.ndarray:
        total = np.zeros(s.shape, dtype=complex)
        for branch, sign in ((0, 1.0), (1, -1.0)):
            u = traced.path(branch, s)
            total += sign * np.exp(-z * npoly.polyval(u, f)) * npoly.polyval(u, g) * traced.velocity(branch, s, u)
        return spec.orientation * total

    edges = np.linspace(0.0, s_end, DIRECT_PANELS + 1)

    def rule(n: int) -> Tuple[complex, float]:
        x, w = gauss_legendre_unit(n)
        value, size = 0j, 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            vals = integrand(a + (b - a) * x)
            value += (b - a) * complex(np.sum(w * vals))
            size += (b - a) * float(np.sum(w * np.abs(vals)))
        return value, size

    coarse, _ = rule(32)
    fine, size = rule(64)
    end_size = float(np.abs(integrand(np.array([s_end])))[0])
    tail = end_size / (m * rate * max(s_end, 1e-300) ** (m - 1))
    if s_end >= traced.s_max and tail > settings.laplace_tol * max(size, 1e-300):
        raise TailDominates("thimble trace too short for this z",
                            {"z": [z.real, z.imag], "tail": tail, "t_max": traced.t_max})
    return fine, abs(fine - coarse) + tail


def thimble_projection(
    spec: ThimbleSpec,
    traced: TracedThimble,
    grid: Optional[PanelGrid] = None,
    settings: Optional[EngineSettings] = None,
) -> RayGridFunction:
    """
    ι(ζ) = g/f'(u₊) - g/f'(u₋) on the ray from f(a), stored with exponent 1/m - 1.

    The Laplace transform of ι along the ray reproduces the thimble integral.
    """
    settings = settings or get_settings()
    m = traced.order
    ray = Ray(spec.critical_value, spec.angle, traced.t_max)
    grid = grid or PanelGrid.uniform(ray.length, max(settings.panel_length, ray.length / 32.0),
                                     settings.nodes_per_panel)
    f = poly.as_complex(spec.f)
    df = npoly.polyder(f)
    g = poly.as_complex(spec.g)
    t = grid.flat_nodes
    u_plus = traced.at_t(0, t)
    u_minus = traced.at_t(1, t)
    jump = npoly.polyval(u_plus, g) / npoly.polyval(u_plus, df) - npoly.polyval(u_minus, g) / npoly.polyval(u_minus, df)
    exponent = 1.0 / m - 1.0
    h = spec.orientation * t ** (-exponent) * jump
    return RayGridFunction(ray, exponent, grid, h)


def projection_identity(
    spec: ThimbleSpec,
    z_points: Sequence[complex],
    allow_degenerate: bool = False,
    settings: Optional[EngineSettings] = None,
) -> List[dict]:
    """Direct integral against the Laplace transform of the projection at each z."""
    settings = settings or get_settings()
    traced = trace_thimble(spec, trace_length(spec, z_points), allow_degenerate=allow_degenerate,
                           settings=settings)
    iota = thimble_projection(spec, traced, settings=settings)
    projected = laplace(LaplaceRequest(iota, tuple(z_points)), settings)

    def row(item: Tuple[complex, Any]) -> dict:
        z, lv = item
        direct, err = thimble_integral_direct(spec, traced, z, settings)
        diff = abs(direct - lv.value)
        return {
            "z": [complex(z).real, complex(z).imag],
            "direct": [direct.real, direct.imag],
            "direct_err": err,
            "projected": [lv.value.real, lv.value.imag],
            "projected_err": lv.error,
            "relative_difference": diff / abs(direct) if direct else diff,
        }

    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        return list(pool.map(row, zip(z_points, projected)))


def monomial_closed_form(spec: ThimbleSpec, z: complex) -> complex:
    """I(z) when f = f(a) + f_m (u - a)^m and g is constant."""
    c, m = spec.seed_scale()
    taylor = _taylor_at(spec.f, spec.crit_point)
    if np.any(np.abs(taylor[m + 1:]) > 0) or poly.degree(spec.g) > 0:
        raise DomainError("closed form needs a monomial phase and constant g")
    z = complex(z)
    omega = cmath.exp(2j * math.pi / m)
    return (spec.orientation * cmath.exp(-z * spec.critical_value) * spec.g[0] * (1 - omega) * c
            * complex(gamma(1.0 + 1.0 / m)) * (z * spec.direction) ** (-1.0 / m))


# ==================== steepest descent ====================

def _double_factorial_odd(n: int) -> int:
    """(2n - 1)!!"""
    out = 1
    for k in range(1, 2 * n, 2):
        out *= k
    return out


def steepest_descent_series(spec: ThimbleSpec, N: int) -> TransMonomial:
    """
    e^{-z f(a)} z^{-1/2} √(2π) Σ_{n<=N} (2n-1)!! b_{2n} z^{-n} from the Morse chart
    ½τ² = f - f(a), oriented like the traced thimble.
    """
    if N > MAX_SERIES_ORDER:
        raise ValueError(f"steepest_descent_series supports N <= {MAX_SERIES_ORDER}")
    crit = spec.critical_point()
    if crit.degenerate:
        raise DegenerateChart("no Morse chart at a degenerate critical point",
                              {"point": [crit.point.real, crit.point.imag]})
    length = 2 * N + 2
    f_taylor = _taylor_at(spec.f, spec.crit_point)
    f_taylor = np.concatenate([f_taylor, np.zeros(length + 2)])
    ratios = np.zeros(length, dtype=complex)
    for k in range(3, length + 2):
        ratios[k - 2] = f_taylor[k] / f_taylor[2]
    chart = np.concatenate([[0.0], series_sqrt1p(ratios, length - 1)])
    inverse = series_revert(chart, length)
    inverse_prime = np.array([(k + 1) * inverse[k + 1] for k in range(length - 1)] + [0.0])
    g_taylor = _taylor_at(spec.g, spec.crit_point)
    form = series_mul(series_compose(g_taylor, inverse, length), inverse_prime, length)

    seed, _ = spec.seed_scale()
    kappa = math.sqrt(2.0) * cmath.exp(0.5j * spec.angle) / seed
    coeffs = [
        spec.orientation * math.sqrt(2 * math.pi) * _double_factorial_odd(n) * form[2 * n] * kappa ** (-2 * n - 1)
        for n in range(N + 1)
    ]
    logger.debug_with("steepest descent", order=N, c0=str(coeffs[0]))
    return TransMonomial(crit.value, 0.5, ShiftedSeries.frequency(0.0, coeffs))
