import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src import config
from src.config import EngineSettings, configure, get_settings, load_settings
from src.engine.errors import SchemaError


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch, tmp_path):
    for name in EngineSettings.model_fields:
        monkeypatch.delenv(f"BORELSUM_{name.upper()}", raising=False)
    monkeypatch.chdir(tmp_path)
    monkeypatch.setattr(config, "_settings", None)


class TestEngineSettings:
    def test_defaults(self):
        settings = load_settings()
        assert settings.threads == 1
        assert settings.nodes_per_panel == 32
        assert settings.picard_tol == 1e-12
        assert settings.laplace_tol == 1e-10
        assert settings.lateral_eps == 0.15
        assert settings.stokes_dispersion_tol == 1e-5
        assert settings.picard_stall_limit == 40

    def test_overrides_skip_none(self):
        settings = load_settings(threads=4, picard_tol=None)
        assert settings.threads == 4
        assert settings.picard_tol == 1e-12

    def test_environment(self, monkeypatch):
        monkeypatch.setenv("BORELSUM_THREADS", "3")
        monkeypatch.setenv("BORELSUM_LAPLACE_TOL", "1e-9")
        settings = load_settings()
        assert settings.threads == 3
        assert settings.laplace_tol == 1e-9

    def test_override_beats_environment(self, monkeypatch):
        monkeypatch.setenv("BORELSUM_THREADS", "3")
        assert load_settings(threads=2).threads == 2

    @pytest.mark.parametrize("overrides", [{"threads": 0}, {"picard_tol": -1.0}, {"nodes_per_panel": 4},
                                           {"stokes_dispersion_tol": 0.0}, {"picard_stall_limit": 1}])
    def test_invalid(self, overrides):
        with pytest.raises(SchemaError) as info:
            load_settings(**overrides)
        assert info.value.details["errors"]

    def test_frozen(self):
        settings = load_settings()
        with pytest.raises(Exception):
            settings.threads = 8

    def test_unknown_field(self):
        with pytest.raises(Exception):
            EngineSettings(speed=1)


class TestGlobalSettings:
    def test_get_loads_once(self):
        first = get_settings()
        assert get_settings() is first

    def test_configure_replaces(self):
        settings = configure(EngineSettings(threads=5))
        assert get_settings() is settings
        assert get_settings().threads == 5
