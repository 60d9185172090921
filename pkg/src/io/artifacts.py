"""Helpers for persisting run artifacts: CSV/JSON writers and the run manifest."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from .. import __version__
from ..utils.metrics import RunLedger
from ..utils.schema_validation import validate_run_manifest

LOGGER = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"

__all__ = [
    "MANIFEST_NAME",
    "RunManifest",
    "default_output_root",
    "format_csv_value",
    "read_json",
    "write_csv",
    "write_json",
]


def default_output_root() -> Path:
    base = os.environ.get("KYLEBACK_OUTPUT_ROOT", "artifacts")
    return Path(base)


def _ensure_destination(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def format_csv_value(value: Any) -> Any:
    """Floats at 12 significant digits; everything else unchanged."""

    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    _ensure_destination(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_csv_value(value) for value in row])
    LOGGER.debug("Wrote %s", path)
    return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(path: Path, payload: Mapping[str, Any]) -> Path:
    """Full-precision JSON (Python's round-trip float repr), sorted keys."""

    _ensure_destination(path)
    with path.open("w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, default=_json_default)
        handle.write("\n")
    LOGGER.debug("Wrote %s", path)
    return path


def read_json(path: Path) -> Dict[str, Any]:
    if not path.exists():
        raise FileNotFoundError(f"Missing artifact: {path}")
    with path.open("r", encoding="utf-8") as handle:
        data = json.load(handle)
    if not isinstance(data, dict):
        raise ValueError(f"Expected a JSON object in {path}")
    return data


@dataclass
class RunManifest:
    """Provenance record written into every output directory."""

    subcommand: str
    output_dir: str
    config_path: Optional[str] = None
    seed: Optional[int] = None
    tool_version: str = __version__
    started_at: str = ""
    wall_clock_seconds: float = 0.0
    stage_timings: Dict[str, Dict[str, float]] = field(default_factory=dict)
    counters: Dict[str, int] = field(default_factory=dict)
    series: Dict[str, List[float]] = field(default_factory=dict)
    instance: Dict[str, Any] = field(default_factory=dict)
    threads: int = 0
    exit_code: int = 0

    @classmethod
    def create(
        cls,
        subcommand: str,
        output_dir: Path,
        *,
        config_path: Optional[Path] = None,
        seed: Optional[int] = None,
        threads: int = 0,
    ) -> "RunManifest":
        started = datetime.fromtimestamp(time.time(), tz=timezone.utc)
        return cls(
            subcommand=subcommand,
            output_dir=str(output_dir),
            config_path=str(config_path) if config_path else None,
            seed=seed,
            started_at=started.isoformat().replace("+00:00", "Z"),
            threads=threads,
        )

    def finish(self, ledger: RunLedger, wall_clock: float, exit_code: int) -> None:
        self.stage_timings = ledger.stage_timings()
        self.counters = ledger.counters()
        self.series = ledger.series()
        self.wall_clock_seconds = float(wall_clock)
        self.exit_code = int(exit_code)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def write(self, directory: Path) -> Path:
        payload = self.to_dict()
        validate_run_manifest(payload)
        return write_json(directory / MANIFEST_NAME, payload)
