import cmath
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import EngineSettings
from src.engine.errors import DegenerateChart, DomainError, RayMisconfigured, StokesUnstable
from src.engine.oracles import bessel_k
from src.engine.plane import VolterraOperator
from src.engine.problems import (
    OdeProblem,
    ThimbleProblem,
    bessel_operator,
    bessel_problem,
    cubic_thimble_problem,
    degenerate_cubic_problem,
)
from src.engine.resurgence import (
    FAILED,
    INCONCLUSIVE,
    REGULAR,
    asymptotic_fit,
    classify,
    coefficient_gap,
    fit_samples,
    regularity_verdict,
    remainder_decay_order,
    stokes_constant,
)
from src.engine.series import ShiftedSeries, TransMonomial
from src.engine.thimble import ThimbleSpec


def synthetic(z, coeffs, alpha=1.0, tau=0.5):
    return cmath.exp(-alpha * z) * z ** (-tau) * sum(c * z ** (-k) for k, c in enumerate(coeffs))


class TestClassify:
    def test_bands(self):
        assert classify(1e-7, 1e-6) == "pass"
        assert classify(1e-4, 1e-6) == "inconclusive"
        assert classify(1e-2, 1e-6) == "fail"

    def test_tol_scale_loosens_pass_only(self):
        assert classify(5e-6, 1e-6, tol_scale=10.0) == "pass"
        assert classify(1e-2, 1e-6, tol_scale=10.0) == "fail"

    def test_coefficient_gap(self):
        assert coefficient_gap([1.0, 2.1], [1.0, 2.0]) == pytest.approx(0.05)
        assert coefficient_gap([1.0, 2.0, 9.0], [1.0, 2.0]) == 0.0


class TestAsymptoticFit:
    def test_fit_samples(self):
        samples = fit_samples(0.3)
        assert len(samples) == 32
        assert abs(samples[0]) == pytest.approx(10.0)
        assert abs(samples[-1]) == pytest.approx(80.0)
        assert cmath.phase(samples[0]) == pytest.approx(-0.3)

    def test_recovers_polynomial(self):
        coeffs = [1.0, 0.5, 0.25]
        values = [(z, synthetic(z, coeffs)) for z in fit_samples(0.0)]
        fit = asymptotic_fit(values, 1.0, 0.5, 3)
        assert np.allclose(fit.coeffs, coeffs + [0.0], atol=1e-8)
        assert fit.variation < 1e-6
        assert fit.samples == 32

    def test_too_few_samples(self):
        values = [(z, synthetic(z, [1.0])) for z in (10.0, 20.0, 40.0)]
        with pytest.raises(DomainError):
            asymptotic_fit(values, 1.0, 0.5, 3)

    def test_needs_spread(self):
        values = [(z, synthetic(z, [1.0])) for z in np.linspace(10.0, 20.0, 12)]
        with pytest.raises(DomainError):
            asymptotic_fit(values, 1.0, 0.5, 3)

    def test_remainder_decay(self):
        series = TransMonomial(1.0, 0.5, ShiftedSeries.frequency(0.0, [1.0, 0.5, 0.25]))
        values = [(z, synthetic(z, [1.0, 0.5, 0.25, 0.1])) for z in fit_samples(0.0)]
        assert remainder_decay_order(values, series, 2) == pytest.approx(-3.0, abs=1e-6)


class TestStokesConstant:
    def test_bessel_one_third(self):
        V = VolterraOperator.at(bessel_operator("1/3"), 1)
        measured = stokes_constant(V, 1, -1, math.pi, settings=EngineSettings())
        assert abs(measured.value - 1.0) < 1e-4
        assert measured.theta == pytest.approx(math.pi)
        assert len(measured.samples) == 5
        assert set(measured.to_dict()) >= {"value", "raw", "dispersion", "samples"}

    @pytest.mark.parametrize("order", ["1/3", "1/4", "2/5"])
    def test_two_cos_nu_pi(self, order):
        V = VolterraOperator.at(bessel_operator(order), 1)
        measured = stokes_constant(V, 1, -1, math.pi, settings=EngineSettings())
        expected = 2.0 * math.cos(math.pi * float(Fraction(order)))
        assert measured.value == pytest.approx(expected, rel=1e-4)
        assert measured.dispersion < 1e-5

    def test_half_order_has_no_jump(self):
        V = VolterraOperator.at(bessel_operator("1/2"), 1)
        measured = stokes_constant(V, 1, -1, math.pi, settings=EngineSettings())
        assert abs(measured.value) < 1e-5

    @pytest.mark.parametrize("order", ["1/3", "1/4"])
    def test_opposite_cut_flips_sign(self, order):
        op = bessel_operator(order)
        settings = EngineSettings()
        forward = stokes_constant(VolterraOperator.at(op, 1), 1, -1, math.pi, settings=settings)
        backward = stokes_constant(VolterraOperator.at(op, -1), -1, 1, 0.0, settings=settings)
        assert backward.value == pytest.approx(-forward.value, rel=1e-4)
        assert backward.theta == pytest.approx(0.0)

    def test_halving_lateral_offset(self):
        V = VolterraOperator.at(bessel_operator("1/3"), 1)
        settings = EngineSettings()
        full = stokes_constant(V, 1, -1, math.pi, eps=0.15, settings=settings)
        half = stokes_constant(V, 1, -1, math.pi, eps=0.075, settings=settings)
        assert half.eps == pytest.approx(0.075)
        assert abs(half.value - full.value) < max(3.0 * max(full.dispersion, half.dispersion), 1e-6)

    def test_dispersion_gate(self):
        V = VolterraOperator.at(bessel_operator("1/3"), 1)
        with pytest.raises(StokesUnstable) as err:
            stokes_constant(V, 1, -1, math.pi, settings=EngineSettings(stokes_dispersion_tol=1e-15))
        assert err.value.code == "stokes_unstable"
        assert err.value.details["dispersion"] > 1e-15

    def test_beta_must_be_a_root(self):
        V = VolterraOperator.at(bessel_operator("1/3"), 1)
        with pytest.raises(RayMisconfigured):
            stokes_constant(V, 1, -2, math.pi, settings=EngineSettings())

    def test_cut_must_point_at_beta(self):
        V = VolterraOperator.at(bessel_operator("1/3"), 1)
        with pytest.raises(RayMisconfigured):
            stokes_constant(V, 1, -1, math.pi / 2, settings=EngineSettings())

    def test_alpha_must_match_operator(self):
        V = VolterraOperator.at(bessel_operator("1/3"), 1)
        with pytest.raises(RayMisconfigured):
            stokes_constant(V, -1, 1, 0.0, settings=EngineSettings())


class TestRegularityVerdict:
    def test_bessel_is_regular(self):
        report = regularity_verdict(bessel_problem("1/3"), [4.0, 8.0, 16.0], settings=EngineSettings())
        assert report.verdict == REGULAR
        assert [c.name for c in report.checks] == ["borel_plane", "frequency", "asymptotic"]
        assert report.failed_check is None
        assert report.reference_name == "bessel_k"
        assert report.psi is not None

    def test_fit_uses_reference(self):
        report = regularity_verdict(bessel_problem("1/3"), [4.0, 8.0], settings=EngineSettings())
        assert report.fit_source == "bessel_k"
        assert report.to_dict()["fit_source"] == "bessel_k"
        asymptotic = report.checks[-1]
        assert asymptotic.status == "pass"
        assert asymptotic.detail == "fitted to bessel_k"

    def test_fit_falls_back_to_borel_sum(self):
        problem = OdeProblem("bessel-no-reference", bessel_operator("1/3"), 1 + 0j, theta=0.0)
        report = regularity_verdict(problem, [4.0, 8.0], settings=EngineSettings())
        assert report.fit_source == "borel_sum"
        assert report.checks[-1].status == "pass"

    def test_mismatched_reference_is_caught(self):
        # K_{1/4} has c1 = -3/32 where the ν = 1/3 series has -5/72
        problem = OdeProblem("bessel-wrong-order", bessel_operator("1/3"), 1 + 0j, theta=0.0,
                             reference=lambda z: bessel_k(0.25, z).value, reference_name="bessel_k[1/4]")
        report = regularity_verdict(problem, [4.0, 8.0, 16.0], settings=EngineSettings())
        asymptotic = report.checks[-1]
        assert report.fit_source == "bessel_k[1/4]"
        assert asymptotic.status != "pass"
        assert asymptotic.residual > 1e-2
        assert report.verdict == FAILED

    def test_impossible_tolerance_fails(self):
        report = regularity_verdict(bessel_problem("1/3"), [4.0, 8.0], tolerances={"asymptotic": 1e-30},
                                    settings=EngineSettings())
        assert report.verdict == FAILED
        assert report.failed_check == "asymptotic"

    def test_report_serialises(self):
        report = regularity_verdict(bessel_problem("1/3"), [4.0, 8.0], settings=EngineSettings())
        data = report.to_dict()
        assert data["verdict"] in (REGULAR, INCONCLUSIVE, FAILED)
        assert "psi" not in data
        assert len(data["laplace_values"]) == 2

    def test_cubic_thimble_is_regular(self):
        report = regularity_verdict(cubic_thimble_problem(), [3.0, 5.0, 8.0], settings=EngineSettings())
        assert report.verdict == REGULAR
        assert report.reference_name == "thimble_integral_direct"

    def test_degenerate_cubic_routes_through_ode(self):
        report = regularity_verdict(degenerate_cubic_problem(), [2.0, 4.0], settings=EngineSettings())
        assert report.verdict == REGULAR
        assert report.formal_coeffs[0] == pytest.approx(1.0)

    def test_quartic_degenerate_has_no_route(self):
        problem = ThimbleProblem("quartic", ThimbleSpec(f=(0, 0, 0, 0, 1)), allow_degenerate=True)
        with pytest.raises(DegenerateChart):
            regularity_verdict(problem, [2.0], settings=EngineSettings())
