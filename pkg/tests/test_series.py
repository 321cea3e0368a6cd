import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.engine.errors import ExactModeUnsupported, GammaPoleError
from src.engine.ode import datum_for, poincare_solution
from src.engine.problems import bessel_operator
from src.engine.series import (
    DeltaPlusSeries,
    SeriesVariable,
    ShiftedSeries,
    TransMonomial,
    borel_transform,
    cauchy_product,
    convolution_product,
    derivative_z,
    formal_laplace,
    gamma,
    gevrey_radius_estimate,
    series_compose,
    series_mul,
    series_revert,
    series_sqrt1p,
    times_power,
    trans_product,
)


def monomial(coeffs, tau=1, alpha=0):
    return TransMonomial(alpha, tau, ShiftedSeries.frequency(Fraction(0), [Fraction(c) for c in coeffs]))


class TestShiftedSeries:
    def test_exact_coefficients_stay_fractions(self):
        s = ShiftedSeries.position(Fraction(1, 2), [1, Fraction(1, 3)])
        assert s.exact
        assert s.coeffs == (Fraction(1), Fraction(1, 3))

    def test_float_coefficients_become_complex(self):
        s = ShiftedSeries.frequency(0.5, [1.0, 2.0])
        assert not s.exact
        assert s.coeffs == (1 + 0j, 2 + 0j)

    def test_position_shift_must_exceed_minus_one(self):
        with pytest.raises(ValueError):
            ShiftedSeries.position(-1, [1])

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError):
            ShiftedSeries.frequency(0, [])

    def test_to_dict_round_trip_exact(self):
        s = ShiftedSeries.position(Fraction(-1, 2), [Fraction(1, 3), Fraction(-5, 72)])
        data = s.to_dict()
        assert data["shift"] == "-1/2"
        assert data["coeffs"] == ["1/3", "-5/72"]
        assert ShiftedSeries.from_dict(data) == s

    def test_to_dict_float_shape(self):
        s = ShiftedSeries.frequency(0.5, [1 + 2j])
        data = s.to_dict()
        assert data["variable"] == "frequency"
        assert data["coeffs"] == [[1.0, 2.0]]

    def test_terms_map(self):
        s = ShiftedSeries.position(Fraction(1, 2), [1, 2])
        assert s.terms() == {Fraction(1, 2): 1, Fraction(3, 2): 2}

    def test_equivalent_ignores_extra_orders(self):
        short = ShiftedSeries.position(0, [1, 2])
        long = ShiftedSeries.position(0, [1, 2, 3])
        assert short.equivalent(long)
        assert not short.equivalent(ShiftedSeries.position(0, [1, 5]))

    def test_equivalent_rejects_other_variable(self):
        a = ShiftedSeries.position(0, [1])
        b = ShiftedSeries.frequency(0, [1])
        assert not a.equivalent(b)

    def test_times_power(self):
        s = times_power(ShiftedSeries.position(0, [1, 1]), 2, -1)
        assert s.shift == 2
        assert s.coeffs == (-1, -1)


class TestGamma:
    def test_exact_factorial(self):
        assert gamma(5, exact=True) == Fraction(24)

    def test_exact_rejects_fractions(self):
        with pytest.raises(ExactModeUnsupported):
            gamma(Fraction(1, 2), exact=True)

    def test_pole(self):
        with pytest.raises(GammaPoleError):
            gamma(-2.0)

    def test_half(self):
        assert complex(gamma(0.5)).real == pytest.approx(math.sqrt(math.pi))


class TestBorelTransform:
    def test_simple_power(self):
        # z^{-3} ↦ ζ²/2
        image = borel_transform(monomial([1], tau=3))
        assert image.shift == 2
        assert image.coeffs == (Fraction(1, 2),)

    def test_constant_term_gives_delta(self):
        image = borel_transform(monomial([2, 3], tau=0))
        assert isinstance(image, DeltaPlusSeries)
        assert image.delta_coeff == 2
        assert image.series.shift == 0
        assert image.series.coeffs == (Fraction(3),)

    def test_gamma_pole_term(self):
        with pytest.raises(GammaPoleError):
            borel_transform(monomial([1], tau=-1))

    def test_round_trip_exact(self):
        t = monomial([1, Fraction(-5, 72), Fraction(385, 10368)], tau=2)
        assert formal_laplace(borel_transform(t)).equivalent(t)

    def test_round_trip_with_delta(self):
        t = monomial([2, 3, 4], tau=0)
        back = formal_laplace(borel_transform(t))
        assert back.coeffs[:3] == t.coeffs[:3]

    def test_fractional_shift_float(self):
        t = TransMonomial(1.0, 0.5, ShiftedSeries.frequency(0.0, [1.0, 0.25]))
        image = borel_transform(t)
        assert image.shift == pytest.approx(-0.5)
        assert complex(image.coeffs[0]) == pytest.approx(1 / math.sqrt(math.pi))
        back = formal_laplace(image, base=1.0)
        assert back.equivalent(t, tol=1e-14)


class TestProducts:
    def test_cauchy(self):
        a = ShiftedSeries.frequency(0, [1, 1])
        b = ShiftedSeries.frequency(0, [1, -1])
        assert cauchy_product(a, b).coeffs == (1, 0)

    def test_borel_homomorphism(self):
        a = monomial([1, 2, 3], tau=1)
        b = monomial([Fraction(1, 2), 1, 0], tau=2)
        image = DeltaPlusSeries.wrap(borel_transform(trans_product(a, b)))
        assert image.equivalent(convolution_product(borel_transform(a), borel_transform(b)))

    def test_delta_is_unit(self):
        s = ShiftedSeries.position(0, [1, 2])
        out = convolution_product(DeltaPlusSeries(Fraction(1), None, horizon=5.0), s)
        assert out.series.coeffs[:2] == (1, 2)

    def test_convolution_of_ones(self):
        # 1 ∗ 1 = ζ
        one = ShiftedSeries.position(0, [Fraction(1)])
        out = convolution_product(one, one)
        assert out.series.shift == 1
        assert out.series.coeffs[0] == 1


class TestDerivative:
    def test_pure_power(self):
        # ∂_z z^{-1} = -z^{-2}
        d = derivative_z(monomial([1], tau=1))
        assert d.tau == 2
        assert d.coeffs == (-1,)

    def test_exponential_factor(self):
        t = TransMonomial(2.0, 0.5, ShiftedSeries.frequency(0.0, [1.0, 0.0]))
        d = derivative_z(t)
        assert complex(d.coeffs[0]) == pytest.approx(-2.0)
        assert complex(d.coeffs[1]) == pytest.approx(-0.5)

    def test_matches_finite_difference(self):
        t = TransMonomial(1.0, 1.0 / 3.0, ShiftedSeries.frequency(0.0, [1.0, 0.2, 0.1]))
        z, h = 7.0, 1e-5
        numeric = (t.evaluate(z + h) - t.evaluate(z - h)) / (2 * h)
        # truncation drops a relative O(z^{-N-1}) term
        assert abs(derivative_z(t).evaluate(z) - numeric) < 2e-3 * abs(numeric)


class TestGevrey:
    def test_factorial_growth_radius(self):
        coeffs = [math.factorial(n) / 2.0 ** n for n in range(16)]
        radius = gevrey_radius_estimate(ShiftedSeries.frequency(0.0, coeffs))
        assert radius == pytest.approx(2.0, rel=1e-6)

    def test_entire_for_convergent_series(self):
        coeffs = [1.0 / math.factorial(n) for n in range(16)]
        assert gevrey_radius_estimate(ShiftedSeries.frequency(0.0, coeffs)) == math.inf

    def test_bessel_series_radius(self):
        # the Borel image of the α = 1 Bessel series is singular at ζ = -1
        op = bessel_operator("1/3")
        formal = poincare_solution(op, datum_for(op, 1), 40)
        assert formal.truncation_order == 40
        assert gevrey_radius_estimate(formal.series) == pytest.approx(2.0, rel=0.2)

    def test_bessel_leading_borel_coefficient(self):
        op = bessel_operator("1/3")
        formal = poincare_solution(op, datum_for(op, 1), 6)
        image = borel_transform(formal)
        assert complex(image.shift).real == pytest.approx(-0.5)
        assert complex(image.coeffs[0]) == pytest.approx(1.0 / math.gamma(0.5))
        for k in range(1, 4):
            expected = float(formal.coeffs[k]) / math.gamma(0.5 + k)
            assert complex(image.coeffs[k]) == pytest.approx(expected, rel=1e-12)

    def test_needs_enough_orders(self):
        with pytest.raises(ValueError):
            gevrey_radius_estimate(ShiftedSeries.frequency(0.0, [1.0, 1.0]))


class TestPowerSeries:
    def test_mul(self):
        out = series_mul([1, 1], [1, -1], 3)
        assert np.allclose(out, [1, 0, -1])

    def test_sqrt1p(self):
        # √(1 + x) = 1 + x/2 - x²/8 + x³/16
        out = series_sqrt1p([0, 1], 4)
        assert np.allclose(out, [1, 0.5, -0.125, 0.0625])

    def test_compose(self):
        # 1 + y + y² with y = x + x²
        out = series_compose([1, 1, 1], [0, 1, 1], 3)
        assert np.allclose(out, [1, 1, 2])

    def test_revert_inverts(self):
        a = np.array([0, 1, 0.5, 0.25, 0, 0], dtype=complex)
        b = series_revert(a, 6)
        assert np.allclose(series_compose(a, b, 6), [0, 1, 0, 0, 0, 0])

    def test_revert_needs_linear_term(self):
        with pytest.raises(ValueError):
            series_revert([0, 0, 1], 3)

    def test_variable_enum(self):
        assert SeriesVariable("position") is SeriesVariable.POSITION
