import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from scipy import special

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.engine.ode import characteristic_roots
from src.engine.plane import PanelGrid
from src.engine.problems import (
    airy_lucas_phase,
    bessel_operator,
    bessel_poincare_coefficient,
    bessel_position_solution,
    bessel_problem,
    cantilever_operator,
    cantilever_residual,
    cantilever_universal,
    cubic_thimble_problem,
    degenerate_cubic_operator,
    degenerate_cubic_problem,
    k0_integrand,
)


class TestOperators:
    def test_bessel_is_exact(self):
        op = bessel_operator("1/3")
        assert op.R == (Fraction(-1, 9),)
        assert all(isinstance(c, Fraction) for c in op.P)

    def test_float_order(self):
        op = bessel_operator(0.3)
        assert op.R[0] == pytest.approx(-0.09)

    def test_cantilever_roots(self):
        assert len(characteristic_roots(cantilever_operator(1))) == 4

    def test_degenerate_cubic(self):
        op = degenerate_cubic_operator(0)
        assert op.P == (0, 1)
        assert op.Q == (Fraction(1, 3),)

    def test_airy_lucas_phase(self):
        assert airy_lucas_phase(3) == [0, -3, 0, 4]
        assert airy_lucas_phase(2) == [-1, 0, 2]


class TestBesselClosedForms:
    def test_poincare_coefficients(self):
        assert bessel_poincare_coefficient("1/3", 1, 0) == 1
        assert bessel_poincare_coefficient("1/3", 1, 1) == Fraction(-5, 72)
        assert bessel_poincare_coefficient("1/3", 1, 2) == Fraction(385, 10368)
        assert bessel_poincare_coefficient("1/3", -1, 1) == Fraction(5, 72)

    def test_half_order_terminates(self):
        assert bessel_poincare_coefficient("1/2", 1, 1) == 0

    def test_position_solution_near_root(self):
        zeta = np.array([1e-6, 1e-4])
        values = bessel_position_solution(Fraction(1, 3), 1, zeta)
        expected = zeta ** -0.5 / math.sqrt(math.pi)
        assert np.allclose(values, expected, rtol=1e-3)

    def test_problem_descriptor(self):
        problem = bessel_problem("1/3")
        assert problem.name == "bessel[1/3]@1"
        assert problem.theta == 0.0
        assert problem.reference_name == "bessel_k"
        assert problem.reference(2.0) == pytest.approx(special.kv(1.0 / 3.0, 2.0), rel=1e-12)

    def test_other_root_has_no_reference(self):
        problem = bessel_problem("1/3", -1)
        assert problem.reference is None
        assert problem.theta == pytest.approx(math.pi)


class TestUniversalSolutions:
    def test_k0_integrand_shape(self):
        psi = k0_integrand()
        assert psi.exponent == -0.5
        assert psi.ray.base == 1.0

    def test_cantilever_closed_form(self):
        grid = PanelGrid.uniform(4.0, 1.0, 32)
        v = cantilever_universal(1.0, 1.0, grid)
        t = 0.5
        # (ζ⁴ - 1)^{-1/2} at ζ = 1 + t
        assert v.value_at(np.array([t]))[0] == pytest.approx((1.5 ** 4 - 1.0) ** -0.5, rel=1e-10)

    @pytest.mark.parametrize("alpha", [1.0, -1.0, 1j, -1j])
    def test_cantilever_residual(self, alpha):
        assert cantilever_residual(1.0, alpha) < 1e-8


class TestThimbleProblems:
    def test_cubic(self):
        problem = cubic_thimble_problem()
        assert problem.spec.critical_value == pytest.approx(-1.0)
        assert problem.spec.angle == pytest.approx(math.pi / 8)
        assert not problem.allow_degenerate

    def test_degenerate(self):
        problem = degenerate_cubic_problem(q=0.5)
        assert problem.allow_degenerate
        assert problem.spec.critical_point().degenerate
        assert problem.spec.critical_value == pytest.approx(0.5)
