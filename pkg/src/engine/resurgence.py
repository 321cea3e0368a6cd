"""
Stokes-constant measurement and Borel-regularity verdicts.
"""
import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.config import EngineSettings, get_settings
from src.engine.errors import (
    BorelError,
    DegenerateChart,
    DomainError,
    RayMisconfigured,
    StokesUnstable,
    UnstableFit,
)
from src.engine.laplace import LaplaceRequest, borel_sum, laplace, frequency_residual
from src.engine.ode import datum_for, default_direction, poincare_solution
from src.engine.plane import (
    PanelGrid,
    Ray,
    RayGridFunction,
    VolterraOperator,
    continue_along_arc,
    picard_solve,
    taylor_extract,
)
from src.engine.problems import OdeProblem, ThimbleProblem, degenerate_cubic_operator
from src.engine.series import DeltaPlusSeries, TransMonomial, borel_transform, gamma
from src.engine.thimble import (
    steepest_descent_series,
    thimble_integral_direct,
    thimble_projection,
    trace_length,
    trace_thimble,
)
from src.logging_config import get_logger

logger = get_logger("borelsum.resurgence")

FIT_EXTRA_ORDERS = 3
FIT_VARIATION_LIMIT = 0.1
STOKES_OFFSETS = (0.3, 0.5, 0.7, 0.9, 1.1)
STOKES_MARGIN = 1.2
CUT_ALIGNMENT = 1e-4
TAYLOR_ORDER = 3
FORMAL_ORDER = 6

DEFAULT_TOLERANCES: Dict[str, float] = {
    "borel_plane": 1e-6,
    "frequency": 1e-7,
    "asymptotic": 1e-4,
}
FAILURE_FACTOR = 1000.0

REGULAR = "regular within tol"
INCONCLUSIVE = "inconclusive"
FAILED = "failed"


# ==================== asymptotic fits ====================

@dataclass(frozen=True)
class AsymptoticFit:
    coeffs: Tuple[complex, ...]
    variation: float
    samples: int

    def to_dict(self) -> dict:
        return {
            "coeffs": [[c.real, c.imag] for c in self.coeffs],
            "variation": self.variation,
            "samples": self.samples,
        }


def fit_samples(theta: float, lo: float = 10.0, hi: float = 80.0, count: int = 32) -> List[complex]:
    """Geometric radii along e^{-iθ}ℝ₊, where e^{-zζ} decays fastest on the θ-ray."""
    return [r * cmath.exp(-1j * theta) for r in np.geomspace(lo, hi, count)]


def _lstsq_fit(x: np.ndarray, y: np.ndarray, degree: int) -> np.ndarray:
    scale = float(np.max(np.abs(x)))
    A = np.vander(x / scale, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef / scale ** np.arange(degree + 1)


def asymptotic_fit(
    values: Sequence[Tuple[complex, complex]],
    alpha: complex,
    tau: complex,
    M: int,
) -> AsymptoticFit:
    """
    c_0..c_M of Φ(z) ~ e^{-αz} z^{-τ} Σ c_k z^{-k}.

    After stripping e^{-αz} z^{-τ}, a polynomial of degree M + 3 in 1/z is fitted by
    least squares. Refits without the one and two samples nearest the origin measure
    stability relative to max_k |c_k|.
    """
    if len(values) < 2 * M + 4:
        raise DomainError(f"asymptotic_fit needs at least {2 * M + 4} samples", {"samples": len(values)})
    z = np.array([complex(v[0]) for v in values])
    phi = np.array([complex(v[1]) for v in values])
    order = np.argsort(np.abs(z))
    z, phi = z[order], phi[order]
    if abs(z[-1]) < 4 * abs(z[0]):
        raise DomainError("samples must spread over at least a factor 4 in |z|")
    y = phi * np.exp(complex(alpha) * z) * z ** complex(tau)
    x = 1.0 / z
    degree = M + FIT_EXTRA_ORDERS

    full = _lstsq_fit(x, y, degree)[: M + 1]
    scale = float(np.max(np.abs(full))) or 1.0
    variation = 0.0
    for drop in (1, 2):
        if len(z) - drop < degree + 1:
            break
        partial = _lstsq_fit(x[drop:], y[drop:], degree)[: M + 1]
        variation = max(variation, float(np.max(np.abs(partial - full))) / scale)
    if variation > FIT_VARIATION_LIMIT:
        raise UnstableFit(f"fitted coefficients move by {variation:.1%} when samples are dropped",
                          {"variation": variation, "order": M})
    logger.debug_with("asymptotic fit", order=M, variation=variation, samples=len(z))
    return AsymptoticFit(tuple(complex(c) for c in full), variation, len(z))


def remainder_decay_order(
    values: Sequence[Tuple[complex, complex]],
    series: TransMonomial,
    N: int,
) -> float:
    """Slope of log|Φ/(e^{-αz}z^{-τ}) - Σ_{n<=N} c_n z^{-n}| against log|z|."""
    logs_z, logs_r = [], []
    coeffs = [complex(c) for c in series.coeffs[: N + 1]]
    for z, phi in values:
        z = complex(z)
        stripped = complex(phi) * cmath.exp(complex(series.alpha) * z) * z ** complex(series.tau)
        partial = sum(c * z ** (-k) for k, c in enumerate(coeffs))
        logs_z.append(math.log(abs(z)))
        logs_r.append(math.log(max(abs(stripped - partial), 1e-300)))
    slope, _ = np.polyfit(logs_z, logs_r, 1)
    return float(slope)


# ==================== Stokes constants ====================

@dataclass(frozen=True)
class StokesMeasurement:
    value: complex
    raw: complex
    dispersion: float
    samples: Tuple[complex, ...]
    eps: float
    alpha: complex
    beta: complex
    theta: float

    def to_dict(self) -> dict:
        return {
            "alpha": [self.alpha.real, self.alpha.imag],
            "beta": [self.beta.real, self.beta.imag],
            "theta": self.theta,
            "eps": self.eps,
            "value": [self.value.real, self.value.imag],
            "raw": [self.raw.real, self.raw.imag],
            "dispersion": self.dispersion,
            "samples": [[s.real, s.imag] for s in self.samples],
        }


def _wrap(angle: float) -> float:
    return cmath.phase(cmath.exp(1j * angle))


def _far_side_argument(theta: float) -> float:
    c = math.cos(theta)
    if abs(c) < 1e-12:
        return math.pi
    return math.copysign(math.pi, c)


def stokes_constant(
    V: VolterraOperator,
    alpha: complex,
    beta: complex,
    theta_cut: float,
    eps: Optional[float] = None,
    settings: Optional[EngineSettings] = None,
) -> StokesMeasurement:
    """
    Jump of ψ_α across the cut through β, in units of ψ_β.

    ψ_α is solved on the lateral rays θ ± ε, continued along circular arcs onto the
    cut at points p beyond β, and compared with ψ_β solved on the ray from β.
    Raises StokesUnstable when the samples disagree by more than
    ``settings.stokes_dispersion_tol``.
    """
    settings = settings or get_settings()
    eps = eps or settings.lateral_eps
    alpha, beta = complex(alpha), complex(beta)
    if abs(V.base - alpha) > 1e-10 * max(1.0, abs(alpha)):
        raise RayMisconfigured("the Volterra operator is not based at alpha",
                               {"alpha": [alpha.real, alpha.imag]})
    if not any(abs(beta - b) < 1e-8 * max(1.0, abs(b)) for b in V.others):
        raise RayMisconfigured("beta is not another characteristic root", {"beta": [beta.real, beta.imag]})
    gap = abs(beta - alpha)
    if abs(_wrap(cmath.phase(beta - alpha) - theta_cut)) > CUT_ALIGNMENT:
        raise RayMisconfigured("beta does not lie on the cut from alpha",
                               {"theta_cut": theta_cut, "direction": cmath.phase(beta - alpha)})
    theta_cut = cmath.phase(beta - alpha)

    length = gap + STOKES_MARGIN
    grid = PanelGrid.refined(length, center=gap, radius=0.6, panel_length=settings.panel_length,
                             fine_length=0.25, n=settings.nodes_per_panel)
    V_beta = VolterraOperator.at(V.op, beta)
    offsets = [d * min(1.0, gap / 2.0) for d in STOKES_OFFSETS]

    def lateral(angle: float):
        return picard_solve(V, Ray(alpha, angle, length), grid=grid, settings=settings)

    with ThreadPoolExecutor(max_workers=min(2, settings.threads)) as pool:
        psi_plus, psi_minus = pool.map(lateral, (theta_cut + eps, theta_cut - eps))
    beta_length = max(STOKES_MARGIN, max(offsets) + 0.2)
    psi_beta = picard_solve(V_beta, Ray(beta, theta_cut, beta_length),
                            grid=PanelGrid.uniform(beta_length, settings.panel_length, settings.nodes_per_panel),
                            settings=settings)

    raws = []
    for d in offsets:
        radius = gap + d
        upper = continue_along_arc(V, psi_plus, radius, theta_cut)
        lower = continue_along_arc(V, psi_minus, radius, theta_cut)
        reference = complex(psi_beta.value_at(d)[0])
        raws.append((upper - lower) / reference)
        logger.debug_with("stokes sample", offset=d, upper=str(upper), lower=str(lower))

    tau_a, tau_b = V.tau.real, V_beta.tau.real
    c_alpha = complex(gamma(tau_a)) * gap ** (1 - tau_a) * cmath.exp(-1j * theta_cut * (tau_a - 1))
    c_beta = (complex(gamma(tau_b)) * gap ** (1 - tau_b)
              * cmath.exp(1j * (tau_b - 1) * (_far_side_argument(theta_cut) - theta_cut)))
    factor = c_alpha / c_beta
    samples = tuple(complex(r * factor) for r in raws)
    mean = complex(np.mean(samples))
    spread = float(np.std(np.array(samples)))
    dispersion = spread / abs(mean) if abs(mean) >= 1e-8 else spread
    logger.info_with("stokes constant", value=str(mean), dispersion=dispersion, eps=eps)
    if dispersion > settings.stokes_dispersion_tol:
        raise StokesUnstable(
            f"Stokes samples disperse by {dispersion:.2e}",
            {"dispersion": dispersion, "tolerance": settings.stokes_dispersion_tol, "eps": eps,
             "value": [mean.real, mean.imag]},
        )
    return StokesMeasurement(
        value=mean,
        raw=complex(np.mean(raws)),
        dispersion=dispersion,
        samples=samples,
        eps=eps,
        alpha=alpha,
        beta=beta,
        theta=theta_cut,
    )


# ==================== regularity verdicts ====================

@dataclass
class CheckRecord:
    name: str
    residual: float
    threshold: float
    status: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "residual": self.residual,
            "threshold": self.threshold,
            "status": self.status,
            "detail": self.detail,
        }


@dataclass
class BorelSummationReport:
    problem: str
    formal_coeffs: List[complex] = field(default_factory=list)
    borel_coeffs: List[complex] = field(default_factory=list)
    taylor_coeffs: List[complex] = field(default_factory=list)
    laplace_values: List[dict] = field(default_factory=list)
    reference_values: List[dict] = field(default_factory=list)
    reference_name: str = ""
    fit_coeffs: List[complex] = field(default_factory=list)
    fit_source: str = ""
    checks: List[CheckRecord] = field(default_factory=list)
    verdict: str = INCONCLUSIVE
    failed_check: Optional[str] = None
    psi: Optional[RayGridFunction] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        def pairs(values):
            return [[complex(v).real, complex(v).imag] for v in values]
        return {
            "problem": self.problem,
            "formal_coeffs": pairs(self.formal_coeffs),
            "borel_coeffs": pairs(self.borel_coeffs),
            "taylor_coeffs": pairs(self.taylor_coeffs),
            "laplace_values": self.laplace_values,
            "reference_values": self.reference_values,
            "reference_name": self.reference_name,
            "fit_coeffs": pairs(self.fit_coeffs),
            "fit_source": self.fit_source,
            "checks": [c.to_dict() for c in self.checks],
            "verdict": self.verdict,
            "failed_check": self.failed_check,
        }


def classify(residual: float, threshold: float, tol_scale: float = 1.0) -> str:
    if residual <= threshold * tol_scale:
        return "pass"
    if residual <= FAILURE_FACTOR * threshold:
        return "inconclusive"
    return "fail"


def _record(report: BorelSummationReport, name: str, residual: float, tolerances: Dict[str, float],
            tol_scale: float, detail: str = ""):
    threshold = tolerances[name]
    report.checks.append(CheckRecord(name, residual, threshold, classify(residual, threshold, tol_scale), detail))


def _record_failure(report: BorelSummationReport, name: str, err: BorelError, tolerances: Dict[str, float]):
    report.checks.append(CheckRecord(name, math.inf, tolerances[name], "fail", f"{err.code}: {err}"))


def coefficient_gap(measured: Sequence[complex], expected: Sequence[complex]) -> float:
    n = min(len(measured), len(expected))
    scale = max(abs(complex(c)) for c in expected[:n]) or 1.0
    return max(abs(complex(a) - complex(b)) for a, b in zip(measured[:n], expected[:n])) / scale


def _borel_coefficients(formal: TransMonomial) -> Tuple[float, List[complex]]:
    image = borel_transform(formal)
    if isinstance(image, DeltaPlusSeries):
        raise DomainError("formal solution has a δ component; no Borel-plane comparison")
    return complex(image.shift).real, [complex(c) for c in image.coeffs]


def _rows(z_points: Sequence[complex], values: Sequence[complex], errors: Optional[Sequence[float]] = None):
    errors = errors if errors is not None else [0.0] * len(values)
    return [{"z_re": complex(z).real, "z_im": complex(z).imag, "val_re": complex(v).real,
             "val_im": complex(v).imag, "err_est": float(e)} for z, v, e in zip(z_points, values, errors)]


def _ode_verdict(problem: OdeProblem, z_samples: Sequence[complex], tolerances: Dict[str, float],
                 tol_scale: float, settings: EngineSettings) -> BorelSummationReport:
    report = BorelSummationReport(problem=problem.name, reference_name=problem.reference_name)
    op = problem.operator
    datum = datum_for(op, problem.alpha)
    theta = problem.theta if problem.theta is not None else default_direction(datum)
    formal = poincare_solution(op, datum, FORMAL_ORDER)
    report.formal_coeffs = [complex(c) for c in formal.coeffs]
    fit_z = fit_samples(theta)
    z_samples = [complex(z) for z in z_samples]

    extra_z = fit_z if problem.reference is None else []
    summed = borel_sum(op, datum, theta, list(z_samples) + extra_z, settings=settings)
    report.psi = summed.psi
    values = [v.value for v in summed.values]
    sample_values, fit_values = values[: len(z_samples)], values[len(z_samples):]
    report.laplace_values = [v.to_row() for v in summed.values[: len(z_samples)]]

    try:
        _, expected = _borel_coefficients(formal)
        report.borel_coeffs = expected
        taylor = taylor_extract(summed.psi, TAYLOR_ORDER)
        report.taylor_coeffs = [complex(c) for c in taylor.coeffs]
        _record(report, "borel_plane", coefficient_gap(report.taylor_coeffs, expected), tolerances, tol_scale)
    except BorelError as e:
        _record_failure(report, "borel_plane", e, tolerances)

    reference_ratio: Optional[complex] = None
    try:
        if problem.reference is not None:
            reference = [complex(problem.reference(z)) for z in z_samples]
            reference_ratio = sample_values[0] / reference[0]
            report.reference_values = _rows(z_samples, reference)
            residual = max(abs(v - reference_ratio * r) / abs(v) for v, r in zip(sample_values, reference))
            _record(report, "frequency", residual, tolerances, tol_scale,
                    f"constant fixed at z = {z_samples[0]}")
        else:
            residual = max(frequency_residual(op, summed.psi, z_samples, settings=settings))
            _record(report, "frequency", residual, tolerances, tol_scale, "operator residual")
    except BorelError as e:
        _record_failure(report, "frequency", e, tolerances)

    try:
        if problem.reference is not None:
            if reference_ratio is None:
                reference_ratio = sample_values[0] / complex(problem.reference(z_samples[0]))
            fit_values = [reference_ratio * complex(problem.reference(z)) for z in fit_z]
            report.fit_source = problem.reference_name or "reference"
        else:
            report.fit_source = "borel_sum"
        fit = asymptotic_fit(list(zip(fit_z, fit_values)), datum.alpha_c, complex(datum.tau), TAYLOR_ORDER)
        report.fit_coeffs = list(fit.coeffs)
        _record(report, "asymptotic", coefficient_gap(fit.coeffs, report.formal_coeffs), tolerances, tol_scale,
                f"fitted to {report.fit_source}")
    except BorelError as e:
        _record_failure(report, "asymptotic", e, tolerances)
    return report


def _thimble_verdict(problem: ThimbleProblem, z_samples: Sequence[complex], tolerances: Dict[str, float],
                     tol_scale: float, settings: EngineSettings) -> BorelSummationReport:
    spec = problem.spec
    report = BorelSummationReport(problem=problem.name, reference_name="thimble_integral_direct")
    fit_z = fit_samples(spec.angle)
    z_samples = [complex(z) for z in z_samples]
    traced = trace_thimble(spec, trace_length(spec, z_samples + fit_z), settings=settings)
    iota = thimble_projection(spec, traced, settings=settings)
    formal = steepest_descent_series(spec, FORMAL_ORDER)
    report.psi = iota
    report.formal_coeffs = [complex(c) for c in formal.coeffs]

    try:
        _, expected = _borel_coefficients(formal)
        report.borel_coeffs = expected
        taylor = taylor_extract(iota, TAYLOR_ORDER)
        report.taylor_coeffs = [complex(c) for c in taylor.coeffs]
        _record(report, "borel_plane", coefficient_gap(report.taylor_coeffs, expected), tolerances, tol_scale)
    except BorelError as e:
        _record_failure(report, "borel_plane", e, tolerances)

    direct = [thimble_integral_direct(spec, traced, z, settings) for z in z_samples]
    report.reference_values = _rows(z_samples, [d[0] for d in direct], [d[1] for d in direct])
    try:
        projected = laplace(LaplaceRequest(iota, tuple(z_samples)), settings)
        report.laplace_values = [v.to_row() for v in projected]
        residual = max(abs(p.value - d[0]) / abs(d[0]) for p, d in zip(projected, direct))
        _record(report, "frequency", residual, tolerances, tol_scale, "direct integral vs Laplace of projection")
    except BorelError as e:
        _record_failure(report, "frequency", e, tolerances)

    try:
        fit_values = [thimble_integral_direct(spec, traced, z, settings)[0] for z in fit_z]
        report.fit_source = "thimble_integral_direct"
        fit = asymptotic_fit(list(zip(fit_z, fit_values)), spec.critical_value, 0.5, TAYLOR_ORDER)
        report.fit_coeffs = list(fit.coeffs)
        _record(report, "asymptotic", coefficient_gap(fit.coeffs, report.formal_coeffs), tolerances, tol_scale,
                "fitted to thimble_integral_direct")
    except BorelError as e:
        _record_failure(report, "asymptotic", e, tolerances)
    return report


def _degenerate_route(problem: ThimbleProblem, z_samples: Sequence[complex],
                      settings: EngineSettings) -> OdeProblem:
    """u³ + q goes through the first-order equation [∂_z + q + 1/(3z)]Φ = 0."""
    spec = problem.spec
    crit = spec.critical_point()
    q = spec.f[0]
    if (crit.order != 3 or len(spec.f) != 4 or abs(crit.point) > 1e-12 or spec.f[1] != 0
            or spec.f[2] != 0 or spec.f[3] != 1 or q.imag != 0 or len(spec.g) != 1):
        raise DegenerateChart("only f = u^3 + q with real q and constant g has a regularity route",
                              {"order": crit.order})
    traced = trace_thimble(spec, trace_length(spec, z_samples), allow_degenerate=True, settings=settings)

    def reference(z: complex) -> complex:
        return thimble_integral_direct(spec, traced, z, settings)[0]

    return OdeProblem(
        name=problem.name,
        operator=degenerate_cubic_operator(q.real),
        alpha=q,
        theta=spec.angle,
        reference=reference,
        reference_name="thimble_integral_direct",
    )


def regularity_verdict(
    problem: Union[OdeProblem, ThimbleProblem],
    z_samples: Sequence[complex],
    tolerances: Optional[Dict[str, float]] = None,
    tol_scale: float = 1.0,
    settings: Optional[EngineSettings] = None,
) -> BorelSummationReport:
    """
    Run the summation pipeline for ``problem`` and compare Borel-plane coefficients,
    frequency-plane values and the large-z fit against their references.
    """
    settings = settings or get_settings()
    tolerances = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    if isinstance(problem, ThimbleProblem):
        if problem.spec.critical_point().degenerate:
            routed = _degenerate_route(problem, z_samples, settings)
            report = _ode_verdict(routed, z_samples, tolerances, tol_scale, settings)
        else:
            report = _thimble_verdict(problem, z_samples, tolerances, tol_scale, settings)
    else:
        report = _ode_verdict(problem, z_samples, tolerances, tol_scale, settings)

    statuses = [c.status for c in report.checks]
    failed = [c.name for c in report.checks if c.status == "fail"]
    if failed:
        report.verdict, report.failed_check = FAILED, failed[0]
    elif all(s == "pass" for s in statuses):
        report.verdict = REGULAR
    else:
        report.verdict = INCONCLUSIVE
    logger.info_with("regularity verdict", problem=report.problem, verdict=report.verdict,
                     checks={c.name: c.residual for c in report.checks})
    return report
