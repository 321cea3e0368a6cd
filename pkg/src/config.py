"""
Engine settings.

Values come from defaults, then ``BORELSUM_*`` environment variables (a ``.env``
file in the working directory is honoured), then explicit overrides.
"""
import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

ENV_PREFIX = "BORELSUM_"


class EngineSettings(BaseModel):
    threads: int = Field(1, ge=1, le=64)
    panel_length: float = Field(1.0, gt=0.0, le=10.0)
    nodes_per_panel: int = Field(32, ge=8, le=96)
    default_t_max: float = Field(8.0, gt=0.0, le=200.0)
    picard_tol: float = Field(1e-12, gt=0.0, lt=1e-3)
    picard_max_iter: int = Field(400, ge=1, le=10000)
    picard_stall_limit: int = Field(40, ge=2, le=1000)
    picard_residual_tol: float = Field(1e-8, gt=0.0, lt=1.0)
    laplace_tol: float = Field(1e-10, gt=0.0, lt=1e-2)
    laplace_max_nodes: int = Field(128, ge=16, le=512)
    t_max_cap: float = Field(80.0, gt=0.0, le=1000.0)
    lateral_eps: float = Field(0.15, gt=0.0, lt=1.0)
    stokes_dispersion_tol: float = Field(1e-5, gt=0.0, lt=1.0)
    trace_tol: float = Field(1e-10, gt=0.0, lt=1e-3)

    model_config = {"extra": "forbid", "frozen": True}


def _from_environment() -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for name in EngineSettings.model_fields:
        raw = os.environ.get(f"{ENV_PREFIX}{name.upper()}")
        if raw not in (None, ""):
            values[name] = raw
    return values


def load_settings(**overrides: Any) -> EngineSettings:
    from src.engine.errors import SchemaError

    load_dotenv()
    values = _from_environment()
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return EngineSettings(**values)
    except ValidationError as e:
        raise SchemaError("invalid engine settings", {"errors": e.errors(include_url=False)}) from e


_settings: Optional[EngineSettings] = None


def get_settings() -> EngineSettings:
    global _settings
    if _settings is None:
        _settings = load_settings()
    return _settings


def configure(settings: EngineSettings) -> EngineSettings:
    global _settings
    _settings = settings
    return settings
