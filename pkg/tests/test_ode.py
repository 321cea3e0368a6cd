import math
import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.engine.errors import DegenerateQ, InvalidOperator, NonSimpleRoots
from src.engine.ode import (
    Level1Operator,
    apply_operator,
    characteristic_roots,
    datum_for,
    default_direction,
    poincare_solution,
)
from src.engine.problems import bessel_operator, bessel_poincare_coefficient, cantilever_operator


class TestLevel1Operator:
    def test_bessel_is_exact(self):
        op = bessel_operator("1/3")
        assert op.exact
        assert op.degree == 2
        assert op.R == (Fraction(-1, 9),)

    def test_rejects_non_monic(self):
        with pytest.raises(InvalidOperator):
            Level1Operator(P=(-1, 0, 2), Q=(0, 1))

    def test_rejects_constant_p(self):
        with pytest.raises(InvalidOperator):
            Level1Operator(P=(1,), Q=(0,))

    def test_rejects_large_q(self):
        with pytest.raises(InvalidOperator):
            Level1Operator(P=(-1, 0, 1), Q=(0, 0, 1))

    def test_dict_round_trip(self):
        op = bessel_operator("1/3")
        data = op.to_dict()
        assert data["R"] == ["-1/9"]
        assert Level1Operator.from_dict(data) == op

    def test_position_symbol(self):
        # p(ζ) = P(-ζ) = ζ² - 1
        op = bessel_operator(0)
        assert op.p(Fraction(2)) == 3
        assert op.q(Fraction(2)) == -2


class TestCharacteristicRoots:
    def test_bessel_roots_and_tau(self):
        data = characteristic_roots(bessel_operator("1/3"))
        assert [d.alpha for d in data] == [Fraction(-1), Fraction(1)]
        assert all(d.tau == Fraction(1, 2) for d in data)

    def test_forbidden_direction_points_at_other_root(self):
        datum = datum_for(bessel_operator("1/3"), 0.9)
        assert datum.alpha == 1
        assert datum.forbidden_directions == pytest.approx((math.pi,))
        assert default_direction(datum) == 0.0

    def test_cantilever_has_four_roots(self):
        data = characteristic_roots(cantilever_operator(1))
        assert len(data) == 4
        # τ = Q(-α)/P'(-α) = -2α³/(-4α³)
        assert all(complex(d.tau) == pytest.approx(0.5) for d in data)

    def test_repeated_root(self):
        with pytest.raises(NonSimpleRoots):
            characteristic_roots(Level1Operator(P=(1, -2, 1), Q=(1,)))

    def test_q_vanishing_at_root(self):
        with pytest.raises(DegenerateQ):
            characteristic_roots(Level1Operator(P=(-1, 0, 1), Q=(-1, 1)))

    def test_datum_serialises(self):
        data = datum_for(bessel_operator("1/3"), 1).to_dict()
        assert data["alpha"] == [1.0, 0.0]
        assert data["tau"] == "1/2"


class TestPoincareSolution:
    def test_bessel_one_third_coefficients(self):
        op = bessel_operator("1/3")
        sol = poincare_solution(op, datum_for(op, 1), 8)
        assert sol.series.exact
        assert sol.coeffs[1] == Fraction(-5, 72)
        assert sol.coeffs[2] == Fraction(385, 10368)

    def test_matches_closed_form_at_both_roots(self):
        op = bessel_operator("1/3")
        for alpha in (1, -1):
            sol = poincare_solution(op, datum_for(op, alpha), 8)
            expected = [bessel_poincare_coefficient("1/3", alpha, k) for k in range(9)]
            assert list(sol.coeffs) == expected

    def test_annihilated_through_truncation(self):
        op = bessel_operator("1/3")
        sol = poincare_solution(op, datum_for(op, 1), 6)
        assert all(c == 0 for c in apply_operator(op, sol))

    def test_float_mode(self):
        op = bessel_operator(0.5)
        sol = poincare_solution(op, datum_for(op, 1), 4)
        # ν = 1/2 truncates: K_{1/2} is e^{-z} times a pure power
        assert abs(complex(sol.coeffs[1])) < 1e-12
        assert complex(sol.coeffs[0]) == 1

    def test_c0_scales(self):
        op = bessel_operator("1/3")
        sol = poincare_solution(op, datum_for(op, 1), 3, c0=2)
        assert sol.coeffs[1] == Fraction(-5, 36)

    def test_rejects_zero_c0(self):
        op = bessel_operator("1/3")
        with pytest.raises(ValueError):
            poincare_solution(op, datum_for(op, 1), 3, c0=0)

    def test_rejects_low_order(self):
        op = bessel_operator("1/3")
        with pytest.raises(ValueError):
            poincare_solution(op, datum_for(op, 1), 0)
