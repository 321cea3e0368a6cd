"""
Error hierarchy for the Borel summation engine.

Every failure carries a machine-readable ``code`` and the process exit code the
CLI maps it to: 1 for a failed check, 2 for bad input, 3 for a numerical failure.
"""
from typing import Any, Dict, Optional

EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_NUMERICAL_FAILURE = 3


class BorelError(Exception):
    """Base exception for engine errors"""
    code = "engine"
    exit_code = EXIT_NUMERICAL_FAILURE

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "message": self.message, "details": self.details}


class InputError(BorelError, ValueError):
    """Base for errors caused by the caller's data"""
    code = "input"
    exit_code = EXIT_INPUT_ERROR


# ==================== series / ODE ====================

class GammaPoleError(InputError):
    """A Borel-transformed term lands on a pole of Gamma"""
    code = "gamma_pole"


class ExactModeUnsupported(InputError):
    """Exact arithmetic requested for a non-integer Gamma argument"""
    code = "exact_mode"


class InvalidOperator(InputError):
    """Operator data violates the level-1 structure"""
    code = "invalid_operator"


class NonSimpleRoots(InputError):
    """Characteristic polynomial has (numerically) repeated roots"""
    code = "non_simple_roots"


class DegenerateQ(InputError):
    """Q vanishes at a characteristic root"""
    code = "degenerate_q"


class ResonanceError(BorelError):
    """Zero pivot in the Poincaré recurrence"""
    code = "resonance"


# ==================== position domain ====================

class RayHitsRoot(BorelError):
    """A ray passes too close to another characteristic root"""
    code = "ray_hits_root"


class NoConvergence(BorelError):
    """Picard iteration did not settle"""
    code = "no_convergence"


class IllConditioned(BorelError):
    """Chebyshev differentiation amplifies too much"""
    code = "ill_conditioned"


class TailDominates(BorelError):
    """Laplace tail estimate exceeds the requested tolerance"""
    code = "tail_dominates"


# ==================== thimbles ====================

class BranchCollision(BorelError):
    """A traced branch ran into another critical point"""
    code = "branch_collision"


class SeedFailure(BorelError):
    """Critical point too degenerate to seed a trace"""
    code = "seed_failure"


class DegenerateChart(BorelError):
    """Morse chart undefined at a degenerate critical point"""
    code = "degenerate_chart"


# ==================== resurgence / oracles / inputs ====================

class UnstableFit(BorelError):
    """Asymptotic coefficients vary too much across sample prefixes"""
    code = "unstable_fit"


class StokesUnstable(BorelError):
    """Stokes constant samples disagree beyond the dispersion tolerance"""
    code = "stokes_unstable"


class RayMisconfigured(InputError):
    """Stokes cut does not pass through the requested singularity"""
    code = "ray_misconfigured"


class DomainError(InputError):
    """Argument outside an oracle's supported domain"""
    code = "domain"


class ParameterUnsupported(InputError):
    """No evaluation path covers these parameters"""
    code = "parameter_unsupported"


class SchemaError(InputError):
    """Problem file or settings failed validation"""
    code = "schema"
