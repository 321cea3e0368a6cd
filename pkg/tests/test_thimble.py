import cmath
import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import EngineSettings
from src.engine.errors import BranchCollision, DegenerateChart, DomainError, SeedFailure
from src.engine.laplace import LaplaceRequest, laplace
from src.engine.problems import airy_lucas_phase
from src.engine.thimble import (
    ThimbleSpec,
    critical_data,
    monomial_closed_form,
    projection_identity,
    steepest_descent_series,
    thimble_integral_direct,
    thimble_projection,
    trace_length,
    trace_thimble,
)

GAUSSIAN = ThimbleSpec(f=(0, 0, 0.5))
CUBIC = ThimbleSpec(f=tuple(airy_lucas_phase(3)), crit_point=0.5, angle=math.pi / 8)


def direct(spec, z, allow_degenerate=False):
    settings = EngineSettings()
    traced = trace_thimble(spec, trace_length(spec, [z]), allow_degenerate=allow_degenerate, settings=settings)
    return thimble_integral_direct(spec, traced, z, settings)[0]


class TestCriticalData:
    def test_chebyshev_cubic(self):
        points = critical_data(airy_lucas_phase(3))
        assert [p.point for p in points] == [pytest.approx(-0.5), pytest.approx(0.5)]
        assert points[0].value == pytest.approx(1.0)
        assert points[1].value == pytest.approx(-1.0)
        assert points[1].second == pytest.approx(12.0)
        assert not any(p.degenerate for p in points)

    def test_degenerate_point(self):
        (point,) = critical_data([0, 0, 0, 1])
        assert point.degenerate
        assert point.order == 3

    def test_linear_phase_rejected(self):
        with pytest.raises(DomainError):
            critical_data([1, 2])


class TestThimbleSpec:
    def test_not_a_critical_point(self):
        with pytest.raises(DomainError):
            ThimbleSpec(f=(0, 0, 0.5), crit_point=1.0)

    def test_bad_orientation(self):
        with pytest.raises(DomainError):
            ThimbleSpec(f=(0, 0, 0.5), orientation=2)

    def test_seed_scale(self):
        c, m = GAUSSIAN.seed_scale()
        assert m == 2
        assert c == pytest.approx(math.sqrt(2.0))

    def test_trace_length_needs_decay(self):
        with pytest.raises(DomainError):
            trace_length(GAUSSIAN, [-1.0])


class TestGaussian:
    def test_direct_integral(self):
        for z in (1.0, 4.0):
            assert direct(GAUSSIAN, z) == pytest.approx(math.sqrt(2 * math.pi / z), rel=1e-10)

    def test_closed_form(self):
        assert monomial_closed_form(GAUSSIAN, 4.0) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12)

    def test_projection_laplace(self):
        settings = EngineSettings()
        traced = trace_thimble(GAUSSIAN, trace_length(GAUSSIAN, [2.0]), settings=settings)
        iota = thimble_projection(GAUSSIAN, traced, settings=settings)
        assert iota.exponent == pytest.approx(-0.5)
        (value,) = laplace(LaplaceRequest(iota, (2.0,)), settings)
        assert value.value == pytest.approx(math.sqrt(math.pi), rel=1e-9)

    def test_series_is_single_term(self):
        series = steepest_descent_series(GAUSSIAN, 4)
        assert complex(series.coeffs[0]) == pytest.approx(math.sqrt(2 * math.pi))
        assert all(abs(complex(c)) < 1e-12 for c in series.coeffs[1:])

    def test_orientation_flips_sign(self):
        flipped = ThimbleSpec(f=(0, 0, 0.5), orientation=-1)
        assert direct(flipped, 2.0) == pytest.approx(-direct(GAUSSIAN, 2.0), rel=1e-12)

    def test_translation(self):
        shift = 0.3 + 0.2j
        got = direct(GAUSSIAN.translated(shift), 2.0)
        assert got == pytest.approx(cmath.exp(-2.0 * shift) * direct(GAUSSIAN, 2.0), rel=1e-9)

    def test_rescaling(self):
        assert direct(GAUSSIAN.rescaled(2.0), 1.5) == pytest.approx(direct(GAUSSIAN, 3.0), rel=1e-9)


class TestTracing:
    def test_trace_stays_on_fibre(self):
        traced = trace_thimble(CUBIC, 2.0, settings=EngineSettings())
        assert traced.order == 2
        assert traced.residual() < 1e-10

    def test_polylines(self):
        traced = trace_thimble(CUBIC, 2.0, settings=EngineSettings())
        lines = traced.to_polylines(samples=50)
        assert set(lines) == {"plus", "minus"}
        assert len(lines["plus"]["t"]) == 50
        assert lines["plus"]["t"][0] == 0.0
        assert lines["minus"]["u_re"][0] == pytest.approx(0.5)

    def test_ray_through_other_critical_value(self):
        spec = ThimbleSpec(f=tuple(airy_lucas_phase(3)), crit_point=0.5, angle=0.0)
        with pytest.raises(BranchCollision):
            trace_thimble(spec, 4.0, settings=EngineSettings())

    def test_degenerate_needs_permission(self):
        spec = ThimbleSpec(f=(0, 0, 0, 1))
        with pytest.raises(SeedFailure):
            trace_thimble(spec, 4.0, settings=EngineSettings())


class TestCubic:
    def test_projection_identity(self):
        rows = projection_identity(CUBIC, (3.0, 5.0, 8.0), settings=EngineSettings())
        assert len(rows) == 3
        assert max(r["relative_difference"] for r in rows) < 1e-6

    def test_steepest_descent_at_large_z(self):
        z = 40.0 * cmath.exp(-1j * CUBIC.angle)
        series = steepest_descent_series(CUBIC, 6)
        assert abs(series.evaluate(z) - direct(CUBIC, z)) < 1e-7 * abs(direct(CUBIC, z))

    def test_no_closed_form_for_full_cubic(self):
        with pytest.raises(DomainError):
            monomial_closed_form(CUBIC, 3.0)

    def test_series_order_limit(self):
        with pytest.raises(ValueError):
            steepest_descent_series(CUBIC, 20)


class TestDegenerateCubic:
    def test_modulus_and_phase(self):
        spec = ThimbleSpec(f=(0, 0, 0, 1))
        for z in (2.0, 8.0):
            value = direct(spec, z, allow_degenerate=True)
            modulus = math.gamma(1.0 / 3.0) * z ** (-1.0 / 3.0) / math.sqrt(3.0)
            assert abs(value) == pytest.approx(modulus, rel=1e-7)
            assert value == pytest.approx(monomial_closed_form(spec, z), rel=2e-7)

    def test_no_morse_chart(self):
        with pytest.raises(DegenerateChart):
            steepest_descent_series(ThimbleSpec(f=(0, 0, 0, 1)), 3)
