"""
Problem files.

A problem file describes either a level-1 ODE (by family or by explicit P, Q, R
coefficients) or a thimble integral, together with the ray, the z-samples and
any tolerance overrides. TOML, JSON and YAML are accepted; unknown keys are
rejected.
"""
import json
import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.engine.errors import SchemaError
from src.engine.ode import Level1Operator, characteristic_roots
from src.engine.polynomial import parse_polynomial, polynomial_to_str
from src.engine.problems import (
    OdeProblem,
    ThimbleProblem,
    bessel_operator,
    bessel_problem,
    cantilever_operator,
    degenerate_cubic_operator,
)
from src.engine.thimble import ThimbleSpec

SPECS_DIR = Path(__file__).resolve().parents[2] / "specs"
DEFAULT_Z = (4.0, 8.0, 16.0)
TOLERANCE_KEYS = ("borel_plane", "frequency", "asymptotic")

Coefficient = Union[int, float, str, List[float]]


def parse_complex(text: str) -> complex:
    """``1``, ``-0.5``, ``1+2i`` or ``3j``; ``i`` and ``j`` are interchangeable."""
    try:
        return complex(str(text).strip().replace(" ", "").replace("i", "j"))
    except ValueError as e:
        raise SchemaError(f"not a complex number: {text!r}", {"value": str(text)}) from e


def parse_coefficient(raw: Coefficient) -> Union[Fraction, float, complex]:
    """Integers and ``p/q`` strings stay exact; ``[re, im]`` pairs become complex."""
    if isinstance(raw, bool):
        raise SchemaError("booleans are not coefficients", {"value": raw})
    if isinstance(raw, int):
        return Fraction(raw)
    if isinstance(raw, float):
        return raw
    if isinstance(raw, list):
        if len(raw) != 2:
            raise SchemaError("complex coefficients are [re, im] pairs", {"value": raw})
        return complex(raw[0], raw[1])
    try:
        return Fraction(raw.strip())
    except ValueError:
        return parse_complex(raw)


class OperatorSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: Optional[Literal["bessel", "cantilever", "degenerate_cubic"]] = None
    order: Optional[Union[int, float, str]] = None
    omega: Optional[Union[int, float, str]] = None
    q: Optional[Union[int, float, str]] = None
    P: Optional[List[Coefficient]] = None
    Q: Optional[List[Coefficient]] = None
    R: Optional[List[Coefficient]] = None

    @model_validator(mode="after")
    def _family_or_coefficients(self) -> "OperatorSection":
        if self.family is None and self.P is None:
            raise ValueError("operator needs either a family or explicit P coefficients")
        if self.family is not None and any(c is not None for c in (self.P, self.Q, self.R)):
            raise ValueError("give either a family or P/Q/R, not both")
        return self

    def build(self) -> Level1Operator:
        if self.family == "bessel":
            return bessel_operator(_parameter(self.order, Fraction(1, 3)))
        if self.family == "cantilever":
            return cantilever_operator(_parameter(self.omega, 1))
        if self.family == "degenerate_cubic":
            return degenerate_cubic_operator(_parameter(self.q, 0))
        return Level1Operator(
            P=tuple(parse_coefficient(c) for c in self.P),
            Q=tuple(parse_coefficient(c) for c in (self.Q or [0])),
            R=tuple(parse_coefficient(c) for c in (self.R or [0])),
            name="custom",
        )


def _parameter(raw: Optional[Union[int, float, str]], default: Any) -> Any:
    if raw is None:
        return default
    value = parse_coefficient(raw)
    if isinstance(value, complex):
        raise SchemaError("family parameters must be real", {"value": str(raw)})
    return value


class ThimbleSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    f: Union[str, List[Coefficient]]
    g: Union[str, List[Coefficient]] = Field(default_factory=lambda: [1])
    a: Coefficient = 0
    orientation: Literal[1, -1] = 1
    allow_degenerate: Optional[bool] = None

    def build(self, theta: float) -> ThimbleSpec:
        return ThimbleSpec(
            f=tuple(_polynomial(self.f)),
            g=tuple(_polynomial(self.g)),
            crit_point=complex(parse_coefficient(self.a)),
            angle=theta,
            orientation=self.orientation,
        )


def _polynomial(raw: Union[str, List[Coefficient]]) -> List[Any]:
    if isinstance(raw, str):
        return parse_polynomial(raw)
    return [parse_coefficient(c) for c in raw]


class ProblemSpecFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["ode", "thimble"]
    name: str = Field("", max_length=200)
    operator: Optional[OperatorSection] = None
    thimble: Optional[ThimbleSection] = None
    root: Optional[Coefficient] = None
    theta: Optional[float] = None
    ray_length: Optional[float] = Field(None, gt=0.0, le=1000.0)
    z: List[Coefficient] = Field(default_factory=lambda: list(DEFAULT_Z), min_length=1, max_length=256)
    tolerances: Dict[str, float] = Field(default_factory=dict)

    @field_validator("tolerances")
    @classmethod
    def _known_tolerances(cls, value: Dict[str, float]) -> Dict[str, float]:
        unknown = sorted(set(value) - set(TOLERANCE_KEYS))
        if unknown:
            raise ValueError(f"unknown tolerance keys {unknown}; expected a subset of {list(TOLERANCE_KEYS)}")
        if any(not (v > 0 and math.isfinite(v)) for v in value.values()):
            raise ValueError("tolerances must be positive and finite")
        return value

    @model_validator(mode="after")
    def _section_matches_kind(self) -> "ProblemSpecFile":
        if self.kind == "ode" and (self.operator is None or self.thimble is not None):
            raise ValueError("an ode problem needs an [operator] section and no [thimble] section")
        if self.kind == "thimble" and (self.thimble is None or self.operator is not None):
            raise ValueError("a thimble problem needs a [thimble] section and no [operator] section")
        return self

    @property
    def z_points(self) -> List[complex]:
        return [complex(parse_coefficient(z)) for z in self.z]

    def to_problem(
        self,
        root: Optional[complex] = None,
        theta: Optional[float] = None,
    ) -> Union[OdeProblem, ThimbleProblem]:
        theta = self.theta if theta is None else theta
        if self.kind == "thimble":
            spec = self.thimble.build(theta or 0.0)
            degenerate = spec.critical_point().degenerate
            allow = self.thimble.allow_degenerate if self.thimble.allow_degenerate is not None else degenerate
            name = self.name or f"thimble[{polynomial_to_str(spec.f)}]"
            return ThimbleProblem(name=name, spec=spec, allow_degenerate=allow)

        op = self.operator.build()
        if root is None and self.root is not None:
            root = complex(parse_coefficient(self.root))
        if root is None:
            root = complex(characteristic_roots(op)[0].alpha)
        root = complex(root)
        if self.operator.family == "bessel" and root.imag == 0 and abs(abs(root.real) - 1) < 1e-12:
            problem = bessel_problem(_parameter(self.operator.order, Fraction(1, 3)), int(round(root.real)))
        else:
            problem = OdeProblem(name=op.name, operator=op, alpha=root)
        if self.name:
            problem = replace(problem, name=self.name)
        if theta is not None:
            problem = replace(problem, theta=theta)
        return problem


def _read(path: Path) -> Any:
    suffix = path.suffix.lower()
    try:
        if suffix == ".toml":
            with open(path, "rb") as f:
                return tomllib.load(f)
        if suffix == ".json":
            with open(path, "r") as f:
                return json.load(f)
        if suffix in (".yaml", ".yml"):
            with open(path, "r") as f:
                return yaml.safe_load(f)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, yaml.YAMLError) as e:
        raise SchemaError(f"cannot parse {path.name}: {e}", {"path": str(path)}) from e
    raise SchemaError(f"unsupported problem file type {suffix!r}", {"path": str(path)})


def validate_spec(data: Any, source: str = "<data>") -> ProblemSpecFile:
    if not isinstance(data, dict):
        raise SchemaError("a problem file must hold a table at the top level", {"path": source})
    try:
        return ProblemSpecFile.model_validate(data)
    except ValidationError as e:
        errors = [{"loc": [str(p) for p in err["loc"]], "msg": err["msg"]} for err in e.errors()]
        raise SchemaError(f"invalid problem file {source}", {"path": source, "errors": errors}) from e


def resolve_spec_path(name: Union[str, Path]) -> Path:
    """A path as given, or a file of that name in the bundled ``specs/`` directory."""
    path = Path(name)
    if path.is_file():
        return path
    bundled = SPECS_DIR / path.name
    if bundled.is_file():
        return bundled
    raise SchemaError(f"problem file not found: {name}", {"path": str(name)})


def load_spec(name: Union[str, Path]) -> ProblemSpecFile:
    path = resolve_spec_path(name)
    return validate_spec(_read(path), str(path))
