"""
Acceptance checks.

Each check is a plain function returning a CheckResult; ``SUITE`` registers them
in a fixed order under a tag so ``run_suite`` output is deterministic.
"""
import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from src.config import EngineSettings, get_settings, load_settings
from src.engine.errors import BorelError, SchemaError, StokesUnstable
from src.engine.laplace import LaplaceRequest, borel_sum, frequency_residual, laplace
from src.engine.ode import characteristic_roots, datum_for, poincare_solution
from src.engine.oracles import bessel_k
from src.engine.plane import (
    PanelGrid,
    Ray,
    RayGridFunction,
    VolterraOperator,
    fractional_integral,
    picard_solve,
    taylor_extract,
)
from src.engine.problems import (
    airy_lucas_phase,
    bessel_operator,
    bessel_poincare_coefficient,
    bessel_position_solution,
    cantilever_operator,
    cantilever_residual,
    cantilever_universal,
    k0_integrand,
)
from src.engine.resurgence import (
    TAYLOR_ORDER,
    asymptotic_fit,
    classify,
    coefficient_gap,
    fit_samples,
    stokes_constant,
)
from src.engine.series import (
    DeltaPlusSeries,
    ShiftedSeries,
    TransMonomial,
    borel_transform,
    convolution_product,
    formal_laplace,
    trans_product,
)
from src.engine.thimble import (
    ThimbleSpec,
    monomial_closed_form,
    projection_identity,
    steepest_descent_series,
    thimble_integral_direct,
    thimble_projection,
    trace_length,
    trace_thimble,
)
from src.logging_config import get_logger, timed

logger = get_logger("borelsum.suite")

SEED = 20240611


@dataclass(frozen=True)
class CheckResult:
    name: str
    tag: str
    status: str
    measured: float
    threshold: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "tag": self.tag,
            "status": self.status,
            "measured": self.measured if math.isfinite(self.measured) else None,
            "threshold": self.threshold,
            "detail": self.detail,
        }


Measurement = Tuple[float, str]


# ==================== series ====================

def check_poincare_exact(settings: EngineSettings) -> Measurement:
    """Poincaré coefficients of the ν = 1/3 operator at α = ±1 against the closed form, exactly."""
    op = bessel_operator("1/3")
    mismatches = 0
    for alpha in (1, -1):
        formal = poincare_solution(op, datum_for(op, alpha), 6)
        for k in range(1, 7):
            if formal.coeffs[k] != bessel_poincare_coefficient("1/3", alpha, k):
                mismatches += 1
    c1, c2 = poincare_solution(op, datum_for(op, 1), 2).coeffs[1:3]
    return float(mismatches), f"c1 = {c1}, c2 = {c2}"


# ==================== ode ====================

def check_bessel_sum(settings: EngineSettings) -> Measurement:
    op = bessel_operator("1/3")
    z_points = [4.0, 8.0, 16.0, 32.0]
    summed = borel_sum(op, datum_for(op, 1), 0.0, z_points, settings=settings)
    values = {z: v.value for z, v in zip(z_points, summed.values)}
    reference = {z: bessel_k(1.0 / 3.0, z).value for z in z_points}
    ratio = values[8.0] / reference[8.0]
    worst = max(abs(values[z] - ratio * reference[z]) / abs(values[z]) for z in z_points)
    return worst, f"normalisation {ratio:.12g}"


def check_borel_plane_closed_form(settings: EngineSettings) -> Measurement:
    op = bessel_operator("1/3")
    V = VolterraOperator.at(op, 1)
    grid = PanelGrid.uniform(5.0, settings.panel_length, settings.nodes_per_panel)
    psi = picard_solve(V, Ray(1.0, 0.0, 5.0), grid=grid, settings=settings)
    t = np.linspace(0.05, 4.0, 40)
    exact = bessel_position_solution(1.0 / 3.0, 1, t)
    worst = float(np.max(np.abs(psi.value_at(t) - exact) / np.abs(exact)))
    return worst, "t in [0.05, 4], 40 points"


# ==================== laplace ====================

def check_k0_integrand(settings: EngineSettings) -> Measurement:
    z_points = (1.0, 3.0)
    values = laplace(LaplaceRequest(k0_integrand(), z_points), settings)
    worst = max(abs(v.value - bessel_k(0.0, z).value) / abs(bessel_k(0.0, z).value)
                for z, v in zip(z_points, values))
    return worst, "z in {1, 3}"


# ==================== thimble ====================

PROJECTION_CASES = ((0.5, math.pi / 8), (-0.5, 0.0), (-0.5, math.pi / 8))


def check_projection_identity(settings: EngineSettings) -> Measurement:
    f = tuple(airy_lucas_phase(3))
    worst = 0.0
    for a, theta in PROJECTION_CASES:
        rows = projection_identity(ThimbleSpec(f=f, crit_point=a, angle=theta), (3.0, 5.0, 8.0),
                                   settings=settings)
        worst = max(worst, max(r["relative_difference"] for r in rows))
    return worst, "a/theta = " + ", ".join(f"{a}/{theta:.4f}" for a, theta in PROJECTION_CASES)


def check_degenerate_cubic(settings: EngineSettings) -> Measurement:
    spec = ThimbleSpec(f=(0, 0, 0, 1), crit_point=0, angle=0.0)
    z_points = (2.0, 8.0)
    traced = trace_thimble(spec, trace_length(spec, z_points), allow_degenerate=True, settings=settings)
    worst = 0.0
    for z in z_points:
        direct, _ = thimble_integral_direct(spec, traced, z, settings)
        modulus = math.gamma(1.0 / 3.0) * z ** (-1.0 / 3.0) / math.sqrt(3.0)
        closed = monomial_closed_form(spec, z)
        worst = max(worst, abs(abs(direct) - modulus) / modulus,
                    abs(cmath.phase(direct / closed)))
    return worst, "modulus and phase at z in {2, 8}"


def check_triple_agreement(settings: EngineSettings) -> Measurement:
    spec = ThimbleSpec(f=tuple(airy_lucas_phase(3)), crit_point=0.5, angle=math.pi / 8)
    fit_z = fit_samples(spec.angle)
    traced = trace_thimble(spec, trace_length(spec, fit_z), settings=settings)
    series = [complex(c) for c in steepest_descent_series(spec, TAYLOR_ORDER).coeffs]
    direct = [thimble_integral_direct(spec, traced, z, settings)[0] for z in fit_z]
    fitted = list(asymptotic_fit(list(zip(fit_z, direct)), spec.critical_value, 0.5, TAYLOR_ORDER).coeffs)
    iota = thimble_projection(spec, traced, settings=settings)
    projected = [complex(c) for c in formal_laplace(taylor_extract(iota, TAYLOR_ORDER),
                                                    spec.critical_value).coeffs]
    gaps = (coefficient_gap(fitted, series), coefficient_gap(projected, series),
            coefficient_gap(fitted, projected))
    return max(gaps), "series/fit {:.2e}, series/projection {:.2e}, fit/projection {:.2e}".format(*gaps)


# ==================== stokes ====================

STOKES_ORDERS = (Fraction(1, 3), Fraction(1, 4), Fraction(2, 5), Fraction(1, 2))
STOKES_RELATIVE = 1e-4
# a vanishing constant is judged in absolute terms
STOKES_ZERO_ABSOLUTE = 1e-5
STOKES_HALVING_FLOOR = 1e-6


def check_stokes_constants(settings: EngineSettings) -> Measurement:
    """
    Bessel Stokes constants 2cos(νπ) across the θ = π cut and their negatives across
    θ = 0. Every measurement must meet the dispersion gate of ``stokes_constant``,
    and the ν = 1/3 value must not move when the lateral offset is halved.
    """
    worst, spread = 0.0, 0.0
    for order in STOKES_ORDERS:
        op = bessel_operator(order)
        expected = 2.0 * math.cos(math.pi * float(order))
        for alpha, beta, theta, sign in ((1, -1, math.pi, 1.0), (-1, 1, 0.0, -1.0)):
            measured = stokes_constant(VolterraOperator.at(op, alpha), alpha, beta, theta, settings=settings)
            target = sign * expected
            if abs(target) < 1e-12:
                error = abs(measured.value) * STOKES_RELATIVE / STOKES_ZERO_ABSOLUTE
            else:
                error = abs(measured.value - target) / abs(target)
            worst = max(worst, error)
            spread = max(spread, measured.dispersion)
            logger.debug_with("stokes check", order=str(order), alpha=alpha, value=str(measured.value),
                              expected=target)

    V = VolterraOperator.at(bessel_operator(STOKES_ORDERS[0]), 1)
    full = stokes_constant(V, 1, -1, math.pi, settings=settings)
    half = stokes_constant(V, 1, -1, math.pi, eps=full.eps / 2, settings=settings)
    moved = abs(half.value - full.value)
    allowed = max(3.0 * max(full.dispersion, half.dispersion), STOKES_HALVING_FLOOR)
    if moved > allowed:
        raise StokesUnstable("Stokes constant moves when the lateral offset is halved",
                             {"eps": full.eps, "moved": moved, "allowed": allowed})
    return worst, (f"orders {', '.join(str(o) for o in STOKES_ORDERS)}; max dispersion {spread:.2e}; "
                   f"halving eps moves {moved:.2e}")


# ==================== cantilever ====================

CANTILEVER_VOLTERRA_TOL = 1e-8
CANTILEVER_FREQUENCY_TOL = 1e-5


def check_cantilever(settings: EngineSettings) -> Measurement:
    """Worst residual as a multiple of its own tolerance (Volterra side and frequency side)."""
    op = cantilever_operator(1.0)
    roots = [complex(d.alpha) for d in characteristic_roots(op)]
    volterra = max(cantilever_residual(1.0, alpha) for alpha in roots)
    frequency = 0.0
    for alpha in roots:
        theta = cmath.phase(alpha)
        universal = cantilever_universal(1.0, alpha, PanelGrid.uniform(16.0, 1.0, settings.nodes_per_panel))
        z_points = [r * cmath.exp(-1j * theta) for r in (6.0, 10.0)]
        frequency = max(frequency, max(frequency_residual(op, universal, z_points,
                                                          method="finite_difference", settings=settings)))
    ratio = max(volterra / CANTILEVER_VOLTERRA_TOL, frequency / CANTILEVER_FREQUENCY_TOL)
    return ratio, f"volterra {volterra:.2e}, frequency {frequency:.2e}"


# ==================== properties ====================

def _random_monomial(rng: np.random.Generator) -> TransMonomial:
    length = int(rng.integers(3, 9))
    coeffs = [Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 10))) for _ in range(length)]
    tau = Fraction(int(rng.integers(1, 4)))
    return TransMonomial(0, tau, ShiftedSeries.frequency(Fraction(0), coeffs))


def _series_properties(rng: np.random.Generator, count: int = 200) -> int:
    failures = 0
    for _ in range(count):
        a, b = _random_monomial(rng), _random_monomial(rng)
        if not formal_laplace(borel_transform(a)).equivalent(a):
            failures += 1
        image = DeltaPlusSeries.wrap(borel_transform(trans_product(a, b)))
        if not image.equivalent(convolution_product(borel_transform(a), borel_transform(b))):
            failures += 1
    return failures


def _complex_uniform(rng: np.random.Generator, size: float) -> complex:
    return complex(rng.uniform(-size, size), rng.uniform(-size, size))


def _random_cubic(rng: np.random.Generator) -> ThimbleSpec:
    """Cubic phase with random complex coefficients, its ray kept clear of the other critical value."""
    while True:
        k = float(rng.uniform(0.5, 1.5)) * cmath.exp(1j * float(rng.uniform(-math.pi, math.pi)))
        f = (_complex_uniform(rng, 1.0), _complex_uniform(rng, 2.0), _complex_uniform(rng, 1.0), k)
        a, b = np.roots([3.0 * f[3], 2.0 * f[2], f[1]])
        gap = npoly.polyval(b, f) - npoly.polyval(a, f)
        angle = float(rng.uniform(-0.6, 0.6))
        off_ray = abs(cmath.phase(gap * cmath.exp(-1j * angle)))
        if abs(a - b) > 0.8 and abs(gap) > 0.5 and off_ray > 0.8:
            return ThimbleSpec(f=f, crit_point=complex(a), angle=angle)


def _thimble_symmetries(rng: np.random.Generator, settings: EngineSettings, count: int = 20) -> float:
    worst = 0.0
    z = 4.0
    for _ in range(count):
        spec = _random_cubic(rng)
        shift = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        factor = float(rng.uniform(0.7, 1.3)) * cmath.exp(1j * float(rng.uniform(-0.2, 0.2)))
        stretch = float(rng.uniform(0.7, 1.3)) * cmath.exp(1j * float(rng.uniform(-0.3, 0.3)))

        def integral(target: ThimbleSpec, at: complex) -> complex:
            traced = trace_thimble(target, trace_length(target, [at]), settings=settings)
            return thimble_integral_direct(target, traced, at, settings)[0]

        base = integral(spec, z)
        pairs = (
            (integral(spec.translated(shift), z), cmath.exp(-shift * z) * base),
            (integral(spec.rescaled(factor), z), integral(spec, factor * z)),
            (integral(spec.pulled_back(stretch), z), stretch * base),
        )
        for got, want in pairs:
            worst = max(worst, abs(got - want) / abs(want))
    return worst


def _semigroup(settings: EngineSettings) -> float:
    ray = Ray(0.5, 0.3, 3.0)
    grid = PanelGrid.uniform(3.0, 1.0, settings.nodes_per_panel)
    f = RayGridFunction.from_smooth(ray, -0.5, grid, lambda t: np.cos(t) + 0.3j * t)
    worst = 0.0
    for mu, nu in ((0.5, 0.5), (0.3, 1.2), (1.0, 0.25)):
        twice = fractional_integral(fractional_integral(f, mu), nu)
        once = fractional_integral(f, mu + nu)
        worst = max(worst, float(np.max(np.abs(twice.values - once.values))) / once.sup_norm())
    return worst


def check_properties(settings: EngineSettings) -> Measurement:
    rng = np.random.default_rng(SEED)
    failures = _series_properties(rng)
    symmetry = _thimble_symmetries(rng, settings)
    semigroup = _semigroup(settings)
    measured = math.inf if failures else max(symmetry, semigroup)
    return measured, f"series failures {failures}, symmetries {symmetry:.2e}, semigroup {semigroup:.2e}"


# ==================== registry ====================

@dataclass(frozen=True)
class SuiteEntry:
    name: str
    tag: str
    threshold: float
    run: Callable[[EngineSettings], Measurement]


SUITE: Tuple[SuiteEntry, ...] = (
    SuiteEntry("poincare_exact", "series", 0.0, check_poincare_exact),
    SuiteEntry("bessel_borel_sum", "ode", 1e-7, check_bessel_sum),
    SuiteEntry("borel_plane_closed_form", "ode", 1e-7, check_borel_plane_closed_form),
    SuiteEntry("thimble_projection", "thimble", 1e-6, check_projection_identity),
    SuiteEntry("degenerate_cubic", "thimble", 1e-7, check_degenerate_cubic),
    SuiteEntry("stokes_constants", "stokes", STOKES_RELATIVE, check_stokes_constants),
    SuiteEntry("triple_agreement", "thimble", 1e-4, check_triple_agreement),
    SuiteEntry("cantilever_universal", "cantilever", 1.0, check_cantilever),
    SuiteEntry("properties", "properties", 1e-10, check_properties),
    SuiteEntry("k0_integrand", "k0", 1e-8, check_k0_integrand),
)

TAGS = tuple(dict.fromkeys(entry.tag for entry in SUITE))


def _run_entry(entry: SuiteEntry, tol_scale: float, settings: EngineSettings) -> CheckResult:
    with timed(logger, "suite check", check=entry.name) as fields:
        try:
            measured, detail = entry.run(settings)
        except BorelError as e:
            logger.warning_with("suite check raised", check=entry.name, code=e.code, error=str(e))
            fields["status"] = "fail"
            return CheckResult(entry.name, entry.tag, "fail", math.inf, entry.threshold, f"{e.code}: {e}")
        status = classify(measured, entry.threshold, tol_scale)
        fields.update(status=status, measured=measured)
    return CheckResult(entry.name, entry.tag, status, measured, entry.threshold, detail)


def select(only: Optional[Sequence[str]] = None) -> List[SuiteEntry]:
    if not only:
        return list(SUITE)
    wanted = set(only)
    unknown = sorted(wanted - set(TAGS) - {e.name for e in SUITE})
    if unknown:
        raise SchemaError(f"unknown suite selection {unknown}", {"known_tags": list(TAGS)})
    return [e for e in SUITE if e.tag in wanted or e.name in wanted]


def run_suite(
    only: Optional[Sequence[str]] = None,
    tol_scale: float = 1.0,
    threads: Optional[int] = None,
    settings: Optional[EngineSettings] = None,
) -> List[CheckResult]:
    """Run the selected checks (by tag or name); rows come back in registry order."""
    settings = settings or (load_settings(threads=threads) if threads else get_settings())
    if tol_scale <= 0:
        raise SchemaError("tol_scale must be positive", {"tol_scale": tol_scale})
    entries = select(only)
    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        results = list(pool.map(lambda e: _run_entry(e, tol_scale, settings), entries))
    logger.info_with("suite finished", checks=len(results), passed=sum(r.passed for r in results))
    return results


def summary(results: Sequence[CheckResult]) -> Dict[str, int]:
    counts = {"pass": 0, "inconclusive": 0, "fail": 0}
    for r in results:
        counts[r.status] += 1
    return counts
