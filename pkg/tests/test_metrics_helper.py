"""Unit tests for the run ledger."""

from __future__ import annotations

import pytest

from src.io.artifacts import RunManifest
from src.utils.metrics import RunLedger, StageRecord


def _ticking(*readings):
    values = iter(readings)
    return lambda: next(values)


def test_reentered_stage_accumulates_seconds_and_paths():
    ledger = RunLedger(clock=_ticking(0.0, 0.5, 1.0, 3.0))
    with ledger.stage("picard_grid", paths=100) as record:
        assert isinstance(record, StageRecord)
    with ledger.stage("picard_grid", paths=50):
        pass
    assert ledger.stage_timings() == {"picard_grid": {"count": 2, "total": 2.5, "paths": 150}}


def test_stage_is_charged_when_the_block_raises():
    ledger = RunLedger(clock=_ticking(1.0, 1.25))
    with pytest.raises(ValueError):
        with ledger.stage("certify", paths=10):
            raise ValueError("boom")
    assert ledger.stage_timings()["certify"] == {"count": 1, "total": 0.25, "paths": 10}


def test_counters_series_and_reset():
    ledger = RunLedger()
    ledger.increment("picard_iterations", 3)
    ledger.increment("picard_iterations")
    ledger.extend("picard_delta", [0.5, 0.05])
    ledger.extend("picard_delta", [0.005])
    assert ledger.counters() == {"picard_iterations": 4}
    assert ledger.series() == {"picard_delta": [0.5, 0.05, 0.005]}

    ledger.reset()
    assert ledger.stage_timings() == {}
    assert ledger.counters() == {}
    assert ledger.series() == {}


def test_ledger_feeds_the_manifest(tmp_path):
    ledger = RunLedger(clock=_ticking(1.0, 1.5, 2.0, 4.0))
    with ledger.stage("solve", paths=200):
        pass
    with ledger.stage("archive"):
        pass
    ledger.increment("picard_iterations", 2)
    ledger.extend("picard_delta", [0.1, 1e-9])

    manifest = RunManifest.create("solve", tmp_path, seed=3)
    manifest.finish(ledger, 3.0, 0)
    assert list(manifest.stage_timings) == ["archive", "solve"]
    assert manifest.stage_timings["archive"] == {"count": 1, "total": 2.0, "paths": 0}
    assert manifest.series["picard_delta"] == [0.1, 1e-9]
    assert manifest.write(tmp_path).name == "manifest.json"
