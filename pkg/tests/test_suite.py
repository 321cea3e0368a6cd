import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import EngineSettings
from src.engine.errors import NoConvergence, SchemaError
from src.engine.suite import (
    SEED,
    SUITE,
    TAGS,
    CheckResult,
    SuiteEntry,
    _random_cubic,
    _run_entry,
    _thimble_symmetries,
    check_poincare_exact,
    run_suite,
    select,
    summary,
)


class TestRegistry:
    def test_order_and_tags(self):
        assert [e.name for e in SUITE][:3] == ["poincare_exact", "bessel_borel_sum", "borel_plane_closed_form"]
        assert set(TAGS) == {"series", "ode", "thimble", "stokes", "cantilever", "properties", "k0"}

    def test_select_all(self):
        assert select() == list(SUITE)
        assert select([]) == list(SUITE)

    def test_select_by_tag_and_name(self):
        assert [e.name for e in select(["thimble"])] == ["thimble_projection", "degenerate_cubic",
                                                         "triple_agreement"]
        assert [e.name for e in select(["k0_integrand", "series"])] == ["poincare_exact", "k0_integrand"]

    def test_select_unknown(self):
        with pytest.raises(SchemaError):
            select(["bogus"])


class TestRows:
    def test_to_dict_hides_infinity(self):
        row = CheckResult("x", "series", "fail", math.inf, 1e-6, "boom")
        assert row.to_dict()["measured"] is None
        assert not row.passed

    def test_summary(self):
        rows = [CheckResult("a", "t", s, 0.0, 1.0) for s in ("pass", "pass", "fail", "inconclusive")]
        assert summary(rows) == {"pass": 2, "inconclusive": 1, "fail": 1}

    def test_engine_error_becomes_failed_row(self):
        def broken(settings):
            raise NoConvergence("did not settle")

        row = _run_entry(SuiteEntry("broken", "ode", 1e-6, broken), 1.0, EngineSettings())
        assert row.status == "fail"
        assert row.detail.startswith("no_convergence")


class TestChecks:
    def test_poincare_exact(self):
        measured, detail = check_poincare_exact(EngineSettings())
        assert measured == 0.0
        assert detail == "c1 = -5/72, c2 = 385/10368"

    def test_run_series_and_k0(self):
        results = run_suite(["series", "k0"], settings=EngineSettings(threads=2))
        assert [r.name for r in results] == ["poincare_exact", "k0_integrand"]
        assert all(r.passed for r in results)

    def test_tol_scale_must_be_positive(self):
        with pytest.raises(SchemaError):
            run_suite(["series"], tol_scale=0.0, settings=EngineSettings())


class TestThimbleSymmetries:
    def test_random_cubics_are_general(self):
        rng = np.random.default_rng(SEED)
        specs = [_random_cubic(rng) for _ in range(5)]
        for spec in specs:
            assert len(spec.f) == 4
            assert any(c.imag != 0 for c in spec.f)
            assert spec.f[2] != 0
            assert not spec.critical_point().degenerate
            assert abs(spec.angle) <= 0.6
        assert len({spec.f for spec in specs}) == 5

    def test_symmetries_hold(self):
        worst = _thimble_symmetries(np.random.default_rng(SEED), EngineSettings(), count=3)
        assert worst < 1e-9
