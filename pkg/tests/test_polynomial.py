import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.engine.errors import SchemaError
from src.engine.polynomial import (
    degree,
    derivative,
    evaluate,
    parse_polynomial,
    polynomial_to_str,
    reflect,
    roots_polished,
)
from src.engine.problems import airy_lucas_phase


class TestParsePolynomial:
    def test_chebyshev_cubic(self):
        assert parse_polynomial("4u^3-3u") == [0, -3, 0, 4]

    def test_division(self):
        assert parse_polynomial("u^2/2") == [0, 0, Fraction(1, 2)]

    def test_rational_coefficient_and_constant(self):
        assert parse_polynomial("1/3*u + 2") == [2, Fraction(1, 3)]

    def test_repeated_powers_add(self):
        assert parse_polynomial("u+u-u^2") == [0, 2, -1]

    def test_wrong_variable(self):
        with pytest.raises(SchemaError):
            parse_polynomial("4x^2")

    def test_garbage(self):
        with pytest.raises(SchemaError):
            parse_polynomial("u**2")

    def test_empty(self):
        with pytest.raises(SchemaError):
            parse_polynomial("  ")


class TestHelpers:
    def test_to_str(self):
        assert polynomial_to_str([0, -3, 0, 4]) == "4u^3-3u"
        assert polynomial_to_str([1, 1]) == "u+1"
        assert polynomial_to_str([0]) == "0"

    def test_evaluate_exact(self):
        assert evaluate([Fraction(1, 2), 0, 1], Fraction(1, 2)) == Fraction(3, 4)

    def test_evaluate_vectorised(self):
        out = evaluate([1, 1], np.array([0.0, 1.0, 2.0]))
        assert np.allclose(out, [1, 2, 3])

    def test_derivative_and_degree(self):
        assert derivative([0, -3, 0, 4]) == [-3, 0, 12]
        assert derivative([5]) == [0]
        assert degree([1, 2, 0, 0]) == 1

    def test_reflect(self):
        assert reflect([1, 2, 3, 4]) == [1, -2, 3, -4]

    def test_roots_sorted(self):
        roots = roots_polished([-1, 0, 1])
        assert np.allclose(roots, [-1, 1])

    def test_airy_lucas_phase(self):
        assert airy_lucas_phase(3) == [0, -3, 0, 4]
        assert airy_lucas_phase(2) == [-1, 0, 2]
