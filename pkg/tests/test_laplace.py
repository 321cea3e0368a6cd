import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import EngineSettings
from src.engine.errors import DomainError, TailDominates
from src.engine.laplace import LaplaceRequest, Tilt, borel_sum, frequency_residual, lateral_pair, laplace
from src.engine.ode import datum_for
from src.engine.oracles import bessel_k
from src.engine.plane import PanelGrid, Ray, RayGridFunction, VolterraOperator, fractional_integral
from src.engine.problems import bessel_operator, k0_integrand
from src.engine.resurgence import stokes_constant


def ray_function(smooth, exponent=0.0, length=40.0, base=0.0):
    grid = PanelGrid.uniform(length, 2.0, 32)
    return RayGridFunction.from_smooth(Ray(base, 0.0, length), exponent, grid, smooth)


class TestLaplace:
    def test_constant(self):
        values = laplace(LaplaceRequest(ray_function(np.ones_like), (2.0, 5.0)), EngineSettings())
        assert values[0].value == pytest.approx(0.5, rel=1e-12)
        assert values[1].value == pytest.approx(0.2, rel=1e-12)

    def test_endpoint_singularity(self):
        # ∫ e^{-zt} t^{-1/2} dt = Γ(1/2) z^{-1/2}
        psi = ray_function(np.ones_like, exponent=-0.5)
        (value,) = laplace(LaplaceRequest(psi, (3.0,)), EngineSettings())
        assert value.value == pytest.approx(math.sqrt(math.pi / 3.0), rel=1e-12)
        assert value.error < 1e-10

    def test_k0_integrand(self):
        values = laplace(LaplaceRequest(k0_integrand(), (1.0, 3.0)), EngineSettings())
        for z, v in zip((1.0, 3.0), values):
            expected = bessel_k(0.0, z).value
            assert abs(v.value - expected) < 1e-8 * abs(expected)

    @pytest.mark.parametrize("nu", [0.5, 1.0, 2.0])
    def test_fractional_integral_divides_by_power(self, nu):
        # L(∂^{-ν} ψ)(z) = z^{-ν} L(ψ)(z)
        psi = ray_function(lambda t: np.exp(-0.5 * t) * np.cos(t))
        z_points = (3.0, 5.0 + 1.0j)
        integrated = laplace(LaplaceRequest(fractional_integral(psi, nu), z_points), EngineSettings())
        plain = laplace(LaplaceRequest(psi, z_points), EngineSettings())
        for z, lhs, rhs in zip(z_points, integrated, plain):
            assert lhs.value == pytest.approx(z ** (-nu) * rhs.value, rel=1e-9)

    def test_detached_drops_exponential(self):
        psi = k0_integrand()
        attached = laplace(LaplaceRequest(psi, (2.0,)), EngineSettings())[0].value
        detached = laplace(LaplaceRequest(psi, (2.0,), tilt=Tilt.DETACHED), EngineSettings())[0].value
        assert attached == pytest.approx(math.exp(-2.0) * detached, rel=1e-13)

    def test_non_decaying_direction(self):
        with pytest.raises(DomainError):
            LaplaceRequest(ray_function(np.ones_like), (-1.0,))

    def test_tail_dominates(self):
        psi = ray_function(np.exp, length=5.0)
        with pytest.raises(TailDominates):
            laplace(LaplaceRequest(psi, (1.5,)), EngineSettings())

    def test_zero_function(self):
        psi = ray_function(np.zeros_like)
        values = laplace(LaplaceRequest(psi, (1.0, 2.0)), EngineSettings())
        assert [v.value for v in values] == [0j, 0j]

    def test_threads_keep_order(self):
        z_points = (1.0, 2.0, 4.0, 8.0)
        values = laplace(LaplaceRequest(ray_function(np.ones_like), z_points), EngineSettings(threads=4))
        assert [v.z for v in values] == [complex(z) for z in z_points]
        assert values[2].value == pytest.approx(0.25, rel=1e-12)

    def test_row_keys(self):
        (value,) = laplace(LaplaceRequest(ray_function(np.ones_like), (2.0,)), EngineSettings())
        assert set(value.to_row()) == {"z_re", "z_im", "val_re", "val_im", "err_est"}


class TestBorelSum:
    def test_bessel_one_third(self):
        op = bessel_operator("1/3")
        summed = borel_sum(op, datum_for(op, 1), 0.0, [4.0, 8.0], settings=EngineSettings())
        # ψ ~ ζ^{-1/2}/Γ(1/2) sums to √(2/π) K_ν
        for z, v in zip((4.0, 8.0), summed.values):
            expected = math.sqrt(2.0 / math.pi) * bessel_k(1.0 / 3.0, z).value
            assert abs(v.value - expected) < 1e-7 * abs(expected)

    def test_frequency_residual(self):
        op = bessel_operator("1/3")
        summed = borel_sum(op, datum_for(op, 1), 0.0, [4.0], settings=EngineSettings())
        residual = frequency_residual(op, summed.psi, [4.0, 8.0], settings=EngineSettings())
        assert max(residual) < 1e-6

    def test_unknown_residual_method(self):
        op = bessel_operator("1/3")
        summed = borel_sum(op, datum_for(op, 1), 0.0, [4.0], settings=EngineSettings())
        with pytest.raises(ValueError):
            frequency_residual(op, summed.psi, [4.0], method="bogus", settings=EngineSettings())


class TestLateralPair:
    def test_no_singularity_between_rays(self):
        # no root of P(-ζ) between the rays from 1 at π/2 ± ε
        V = VolterraOperator.at(bessel_operator("1/3"), 1)
        plus, minus = lateral_pair(V, math.pi / 2, 0.15, [-4j, -8j], settings=EngineSettings())
        for p, m in zip(plus, minus):
            assert abs(p.value - m.value) < 1e-7 * abs(p.value)

    def test_values_match_direct_sum(self):
        op = bessel_operator("1/3")
        V = VolterraOperator.at(op, 1)
        plus, _ = lateral_pair(V, 0.0, 0.1, [8.0], settings=EngineSettings())
        direct = borel_sum(op, datum_for(op, 1), 0.0, [8.0], settings=EngineSettings()).values[0]
        assert abs(plus[0].value - direct.value) < 1e-7 * abs(direct.value)

    def test_jump_across_stokes_direction(self):
        # rays from 1 at π ± ε straddle the root at -1; the difference is the
        # Stokes jump times the Borel sum from -1
        op = bessel_operator("1/3")
        V = VolterraOperator.at(op, 1)
        settings = EngineSettings(panel_length=0.25)
        z = -3.0
        plus, minus = lateral_pair(V, math.pi, 0.15, [z], settings=settings)
        jump = plus[0].value - minus[0].value
        stokes = stokes_constant(V, 1, -1, math.pi, eps=0.15, settings=EngineSettings())
        from_beta = borel_sum(op, datum_for(op, -1), math.pi, [z], settings=settings).values[0].value
        assert stokes.value == pytest.approx(1.0, rel=1e-4)
        assert abs(jump) > 1e-3
        assert jump == pytest.approx(stokes.raw * from_beta, rel=1e-5)

    def test_jump_independent_of_eps(self):
        V = VolterraOperator.at(bessel_operator("1/3"), 1)
        settings = EngineSettings(panel_length=0.25)
        jumps = []
        for eps in (0.15, 0.075):
            plus, minus = lateral_pair(V, math.pi, eps, [-3.0], settings=settings)
            jumps.append(plus[0].value - minus[0].value)
        assert jumps[1] == pytest.approx(jumps[0], rel=1e-5)
