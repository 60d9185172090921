"""Merge run directories into flat tables for plotting.

Every run directory carries a ``manifest.json``; its ``subcommand`` decides which
result file is read and which table the rows land in. Tables are keyed by
``(instance, dt, num_paths, R)`` and written as CSV plus one JSON document.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence

from .artifacts import MANIFEST_NAME, read_json, write_csv, write_json

LOGGER = logging.getLogger(__name__)

REPORT_JSON = "report.json"

__all__ = ["REPORT_JSON", "ReportError", "RunRecord", "collect_run", "merge_runs", "write_report"]


class ReportError(ValueError):
    """Inputs cannot be merged; ``offending`` lists the directories at fault."""

    def __init__(self, message: str, offending: Sequence[Path] = ()) -> None:
        self.offending = [Path(path) for path in offending]
        listing = ", ".join(str(path) for path in self.offending)
        super().__init__(f"{message}: {listing}" if listing else message)


@dataclass
class RunRecord:
    directory: Path
    manifest: Dict[str, Any]
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)

    @property
    def subcommand(self) -> str:
        return str(self.manifest["subcommand"])

    @property
    def tool_version(self) -> str:
        return str(self.manifest.get("tool_version", ""))


def _instance_label(values: Sequence[float], prior: Sequence[float], horizon: float) -> str:
    v = ",".join(f"{x:g}" for x in values)
    p = ",".join(f"{x:g}" for x in prior)
    return f"N={len(values)};v=[{v}];p=[{p}];T={horizon:g}"


def _manifest_label(manifest: Dict[str, Any]) -> str:
    instance = manifest.get("instance") or {}
    if {"values", "prior", "horizon"} <= set(instance):
        return _instance_label(instance["values"], instance["prior"], float(instance["horizon"]))
    return str(instance.get("label", manifest["subcommand"]))


def _solve_rows(directory: Path, manifest: Dict[str, Any]) -> Dict[str, List[Dict[str, Any]]]:
    summary = read_json(directory / "summary.json")
    row: Dict[str, Any] = {
        "run": str(directory),
        "instance": _instance_label(summary["values"], summary["prior"], float(summary["horizon"])),
        "dt": float(summary["horizon"]) / int(summary["num_steps"]),
        "num_paths": int(summary["num_paths"]),
        "seed": int(summary["seed"]),
        "solver": summary["solver"],
        "converged": bool(summary["converged"]),
        "iterations": int(summary["iterations"]),
        "final_delta": summary["delta_log"][-1] if summary["delta_log"] else None,
    }
    for i, value in enumerate(summary["y0"]):
        row[f"y0_{i + 1}"] = value
    return {"solve": [row]}


def _verify_rows(directory: Path, manifest: Dict[str, Any]) -> Dict[str, List[Dict[str, Any]]]:
    certificate = read_json(directory / "certificate.json")
    row = {
        "run": str(directory),
        "instance": _manifest_label(manifest),
        "dt": certificate["dt"],
        "num_paths": certificate["num_paths"],
        "seed": certificate["seed"],
        "epsilon1": certificate["epsilon1"],
        "epsilon1_se": certificate["epsilon1_se"],
        "epsilon2": certificate["epsilon2"],
        "epsilon2_se": certificate.get("epsilon2_se"),
        "epsilon": certificate.get("epsilon"),
        "value_solver": certificate.get("value_solver"),
    }
    return {"verify": [row]}


def _bridge_rows(directory: Path, manifest: Dict[str, Any]) -> Dict[str, List[Dict[str, Any]]]:
    rates = read_json(directory / "rate_report.json")
    rows = [{"run": str(directory), "num_paths": manifest.get("instance", {}).get("num_paths"), **row} for row in rates["rows"]]
    slopes = {
        "run": str(directory),
        "levels": ",".join(f"{row['R']:g}" for row in rates["rows"]),
        "eps2_slope": rates["eps2_slope"],
        "eta_slope": rates["eta_slope"],
        "eta_constant": rates["eta_constant"],
    }
    return {"bridge": rows, "bridge_slopes": [slopes]}


def _levelset_rows(directory: Path, manifest: Dict[str, Any]) -> Dict[str, List[Dict[str, Any]]]:
    membership = read_json(directory / "membership.json")
    rows = []
    for entry in membership["rows"]:
        row: Dict[str, Any] = {"run": str(directory), "instance": _manifest_label(manifest)}
        for i, value in enumerate(entry["candidate"]):
            row[f"y_{i + 1}"] = value
        row.update(
            {
                "cost_at_equilibrium_controls": entry["cost_at_equilibrium"],
                "best_search_value": entry["best_search_value"],
                "verdict": entry["verdict"],
                "level_tol": membership["level_tol"],
            }
        )
        rows.append(row)
    return {"levelset": rows}


def _markov_rows(directory: Path, manifest: Dict[str, Any]) -> Dict[str, List[Dict[str, Any]]]:
    report = read_json(directory / "markov_report.json")
    entries = report["tests"] if "tests" in report else [report]
    return {"markov": [{"run": str(directory), "instance": _manifest_label(manifest), **entry} for entry in entries]}


_READERS = {
    "solve": _solve_rows,
    "verify": _verify_rows,
    "bridge": _bridge_rows,
    "levelset": _levelset_rows,
    "markov-test": _markov_rows,
}


def collect_run(directory: Path) -> RunRecord:
    directory = Path(directory)
    manifest = read_json(directory / MANIFEST_NAME)
    reader = _READERS.get(manifest.get("subcommand"))
    if reader is None:
        raise ReportError(f"cannot report on subcommand {manifest.get('subcommand')!r}", [directory])
    if manifest.get("exit_code", 0) != 0:
        LOGGER.warning("Run %s finished with exit code %s", directory, manifest["exit_code"])
    try:
        tables = reader(directory, manifest)
    except (KeyError, FileNotFoundError) as exc:
        raise ReportError(f"incomplete run directory ({exc})", [directory]) from exc
    return RunRecord(directory=directory, manifest=manifest, tables=tables)


def _sort_key(row: Dict[str, Any]):
    return (
        str(row.get("instance", "")),
        -float(row.get("dt") or 0.0),
        int(row.get("num_paths") or 0),
        float(row.get("R") or 0.0),
        str(row.get("run", "")),
    )


def _add_refinement_columns(rows: List[Dict[str, Any]]) -> None:
    """``y0_change_i``: change of Y₀ against the next coarser Δt of the same instance."""

    previous: Dict[str, Dict[str, Any]] = {}
    for row in rows:
        key = f"{row['instance']}|{row['solver']}|{row['num_paths']}"
        before = previous.get(key)
        for name in [column for column in row if column.startswith("y0_") and not column.startswith("y0_change")]:
            suffix = name[len("y0_") :]
            row[f"y0_change_{suffix}"] = None if before is None else row[name] - before[name]
        previous[key] = row


def merge_runs(directories: Sequence[Path], *, force: bool = False) -> Dict[str, List[Dict[str, Any]]]:
    """Collect every run and return ``{table: rows}``.

    Raises :class:`ReportError` when no directory is given, when tool versions
    differ (unless ``force``), or when rows of one table disagree on their columns.
    """

    if not directories:
        raise ReportError("no run directories given")
    records = [collect_run(Path(directory)) for directory in directories]

    versions = {record.tool_version for record in records}
    if len(versions) > 1:
        reference = records[0].tool_version
        offending = [record.directory for record in records if record.tool_version != reference]
        if not force:
            raise ReportError(f"tool versions differ ({', '.join(sorted(versions))})", offending)
        LOGGER.warning("Merging runs from tool versions %s because --force was given", sorted(versions))

    tables: Dict[str, List[Dict[str, Any]]] = {}
    owners: Dict[str, List[Path]] = {}
    for record in records:
        for name, rows in record.tables.items():
            tables.setdefault(name, []).extend(rows)
            owners.setdefault(name, []).extend([record.directory] * len(rows))

    for name, rows in tables.items():
        reference = set(rows[0])
        offending = sorted({str(owner) for row, owner in zip(rows, owners[name]) if set(row) != reference})
        if offending:
            raise ReportError(f"table {name!r} mixes incompatible schemas", [Path(owners[name][0]), *map(Path, offending)])
        rows.sort(key=_sort_key)

    if "solve" in tables:
        _add_refinement_columns(tables["solve"])
    LOGGER.info("Merged %d runs into tables %s", len(records), sorted(tables))
    return tables


def write_report(tables: Dict[str, List[Dict[str, Any]]], destination: Path, *, inputs: Sequence[Path] = ()) -> List[Path]:
    """One ``report_<table>.csv`` per table plus ``report.json``."""

    destination = Path(destination)
    written = []
    for name, rows in sorted(tables.items()):
        header = list(rows[0])
        written.append(
            write_csv(destination / f"report_{name}.csv", header, ([row.get(column) for column in header] for row in rows))
        )
    written.append(write_json(destination / REPORT_JSON, {"inputs": [str(path) for path in inputs], "tables": tables}))
    return written
