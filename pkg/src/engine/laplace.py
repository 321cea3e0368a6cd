"""
Numerical Laplace transform of ray grid functions.

    L_{ζ,α} ψ(z) = ∫_ray e^{-zζ} ψ(ζ) dζ = e^{-αz} · e^{iθ} ∫_0^∞ e^{-ct} t^σ h(t) dt,  c = z e^{iθ}

The detached value omits e^{-αz}.
"""
import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from src.config import EngineSettings, get_settings
from src.engine.errors import DomainError, TailDominates
from src.engine.ode import CharacteristicDatum, Level1Operator
from src.engine.plane import PanelGrid, Ray, RayGridFunction, VolterraOperator, picard_solve
from src.engine.quadrature import gauss_jacobi_unit, gauss_legendre_unit
from src.logging_config import get_logger

logger = get_logger("borelsum.laplace")

CUTOFF_EXPONENT = 45.0
PIECE_DECAY = 4.0


class Tilt(Enum):
    ATTACHED = "attached"
    DETACHED = "detached"


@dataclass(frozen=True)
class LaplaceRequest:
    psi: RayGridFunction
    z_points: Tuple[complex, ...]
    tilt: Tilt = Tilt.ATTACHED
    tol: Optional[float] = None

    def __post_init__(self):
        points = tuple(complex(z) for z in self.z_points)
        object.__setattr__(self, "z_points", points)
        direction = self.psi.ray.direction
        for z in points:
            if (z * direction).real <= 0:
                raise DomainError(
                    f"z = {z} does not decay along the ray (Re(z e^(iθ)) <= 0)",
                    {"z": [z.real, z.imag], "angle": self.psi.ray.angle},
                )


@dataclass(frozen=True)
class LaplaceValue:
    z: complex
    value: complex
    error: float
    tail: float = 0.0

    def to_row(self) -> dict:
        return {
            "z_re": self.z.real,
            "z_im": self.z.imag,
            "val_re": self.value.real,
            "val_im": self.value.imag,
            "err_est": self.error,
        }


def _pieces(grid: PanelGrid, t_end: float, max_len: float) -> List[Tuple[float, float]]:
    out = []
    for a, b in zip(grid.edges, grid.edges[1:]):
        if a >= t_end:
            break
        b = min(b, t_end)
        count = max(1, int(math.ceil((b - a) / max_len - 1e-12)))
        cuts = np.linspace(a, b, count + 1)
        out.extend(zip(cuts[:-1], cuts[1:]))
    return out


def _piece_integral(psi: RayGridFunction, c: complex, a: float, b: float, n: int) -> complex:
    sigma = psi.exponent
    if a == 0.0:
        x, w = gauss_jacobi_unit(n, 0.0, sigma)
        t = b * x
        weights = w * b ** (sigma + 1.0)
    else:
        x, w = gauss_legendre_unit(n)
        t = a + (b - a) * x
        weights = (b - a) * w * t ** sigma
    return complex(np.sum(weights * np.exp(-c * t) * psi.smooth_at(t)))


def _laplace_one(psi: RayGridFunction, z: complex, tilt: Tilt, tol: float, max_nodes: int) -> LaplaceValue:
    ray = psi.ray
    c = z * ray.direction
    rc = c.real
    t_end = min(psi.grid.length, CUTOFF_EXPONENT / rc)
    max_len = PIECE_DECAY / abs(c)

    total = 0j
    quad_error = 0.0
    for a, b in _pieces(psi.grid, t_end, max_len):
        n = 32
        coarse = _piece_integral(psi, c, a, b, n)
        fine = _piece_integral(psi, c, a, b, 2 * n)
        n *= 2
        while abs(fine - coarse) > 0.1 * tol * max(1.0, abs(fine)) and 2 * n <= max_nodes:
            coarse, fine = fine, _piece_integral(psi, c, a, b, 2 * n)
            n *= 2
        total += fine
        quad_error += abs(fine - coarse)

    beyond = psi.grid.nodes >= t_end
    h_norm = float(np.max(np.abs(psi.values[beyond]))) if beyond.any() else float(np.max(np.abs(psi.values[-1])))
    growth = psi.growth_rate()
    if rc - growth <= 0:
        tail = math.inf
    else:
        tail = h_norm * t_end ** psi.exponent * math.exp((growth - rc) * t_end) / (rc - growth)

    detached = ray.direction * total
    if tail > tol * max(1.0, abs(detached)):
        raise TailDominates(
            f"Laplace tail {tail:.2e} exceeds tolerance at z = {z}",
            {"z": [z.real, z.imag], "tail": tail, "t_max": psi.grid.length, "growth": growth},
        )
    factor = cmath.exp(-ray.base * z) if tilt == Tilt.ATTACHED else 1.0
    return LaplaceValue(z, factor * detached, abs(factor) * (quad_error + tail), abs(factor) * tail)


def laplace(req: LaplaceRequest, settings: Optional[EngineSettings] = None) -> List[LaplaceValue]:
    """Per-z values with error estimates; evaluation fans out over ``settings.threads``."""
    settings = settings or get_settings()
    tol = req.tol or settings.laplace_tol
    if not np.any(req.psi.values):
        return [LaplaceValue(z, 0j, 0.0) for z in req.z_points]

    def one(z: complex) -> LaplaceValue:
        return _laplace_one(req.psi, z, req.tilt, tol, settings.laplace_max_nodes)

    if settings.threads > 1 and len(req.z_points) > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            return list(pool.map(one, req.z_points))
    return [one(z) for z in req.z_points]


# ==================== Borel sums ====================

@dataclass
class BorelSum:
    psi: RayGridFunction
    values: List[LaplaceValue] = field(default_factory=list)

    @property
    def t_max(self) -> float:
        return self.psi.grid.length


def _solve_with_extension(
    V: VolterraOperator,
    angle: float,
    z_points: Sequence[complex],
    settings: EngineSettings,
    t_max: Optional[float] = None,
    grid_factory: Optional[Callable[[float], PanelGrid]] = None,
    tilt: Tilt = Tilt.ATTACHED,
) -> BorelSum:
    length = t_max or settings.default_t_max
    while True:
        grid = grid_factory(length) if grid_factory else PanelGrid.uniform(
            length, max(settings.panel_length, length / 32.0), settings.nodes_per_panel)
        psi = picard_solve(V, Ray(V.base, angle, length), grid=grid, settings=settings)
        try:
            values = laplace(LaplaceRequest(psi, tuple(z_points), tilt), settings)
            return BorelSum(psi, values)
        except TailDominates as e:
            if 2 * length > settings.t_max_cap:
                raise
            logger.warning_with("extending ray for Laplace tail", t_max=length, tail=e.details.get("tail"))
            length *= 2


def borel_sum(
    op: Level1Operator,
    datum: CharacteristicDatum,
    theta: float,
    z_points: Sequence[complex],
    t_max: Optional[float] = None,
    settings: Optional[EngineSettings] = None,
) -> BorelSum:
    """Picard solve on the θ-ray from α and Laplace transform, doubling T_max until the tail fits."""
    settings = settings or get_settings()
    V = VolterraOperator.from_datum(op, datum)
    return _solve_with_extension(V, theta, z_points, settings, t_max)


def lateral_pair(
    V: VolterraOperator,
    theta: float,
    eps: Optional[float],
    z_points: Sequence[complex],
    t_max: Optional[float] = None,
    settings: Optional[EngineSettings] = None,
) -> Tuple[List[LaplaceValue], List[LaplaceValue]]:
    """(Φ^{θ+ε}, Φ^{θ-ε}) from Picard solves on the two lateral rays."""
    settings = settings or get_settings()
    eps = eps or settings.lateral_eps

    def side(angle: float) -> List[LaplaceValue]:
        return _solve_with_extension(V, angle, z_points, settings, t_max).values

    with ThreadPoolExecutor(max_workers=min(2, settings.threads)) as pool:
        plus, minus = pool.map(side, (theta + eps, theta - eps))
    logger.debug_with("lateral pair", angle=theta, eps=eps, points=len(z_points))
    return plus, minus


# ==================== frequency-side residual ====================

def _fd_weights(order: int, half_width: int) -> np.ndarray:
    offsets = np.arange(-half_width, half_width + 1, dtype=float)
    powers = np.vander(offsets, increasing=True).T
    rhs = np.zeros(len(offsets))
    rhs[order] = math.factorial(order)
    return np.linalg.solve(powers, rhs)


def frequency_residual(
    op: Level1Operator,
    psi: RayGridFunction,
    z_points: Sequence[complex],
    method: str = "moments",
    step: float = 0.15,
    settings: Optional[EngineSettings] = None,
) -> List[float]:
    """
    Relative size of 𝒫Φ(z) for Φ = L_{ζ,α} ψ.

    ``moments`` uses ∂_z^k Φ = L[(-ζ)^k ψ]; ``finite_difference`` uses a central stencil
    on Φ itself.
    """
    settings = settings or get_settings()
    d = op.degree
    z_points = [complex(z) for z in z_points]
    if method == "moments":
        derivs = [
            [v.value for v in laplace(LaplaceRequest(psi.moment(k), tuple(z_points)), settings)]
            for k in range(d + 1)
        ]
    elif method == "finite_difference":
        half = d + 1
        derivs = [[] for _ in range(d + 1)]
        for z in z_points:
            shifted = tuple(z + j * step for j in range(-half, half + 1))
            phi = np.array([v.value for v in laplace(LaplaceRequest(psi, shifted), settings)])
            for k in range(d + 1):
                derivs[k].append(complex(np.dot(_fd_weights(k, half), phi)) / step ** k)
    else:
        raise ValueError(f"unknown residual method {method!r}")

    out = []
    for i, z in enumerate(z_points):
        terms = [complex(op.P[k]) * derivs[k][i] for k in range(len(op.P))]
        terms += [complex(op.Q[k]) * derivs[k][i] / z for k in range(len(op.Q))]
        terms += [complex(r) * derivs[0][i] * z ** (-2 - j) for j, r in enumerate(op.R) if r != 0]
        scale = sum(abs(x) for x in terms)
        out.append(abs(sum(terms)) / scale if scale else 0.0)
    return out
