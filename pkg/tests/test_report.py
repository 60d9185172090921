from pathlib import Path

import pytest

from src.io.artifacts import RunManifest, write_json
from src.io.report import REPORT_JSON, ReportError, collect_run, merge_runs, write_report


def _solve_run(root: Path, name: str, num_steps: int, y0: float, *, version: str | None = None) -> Path:
    directory = root / name
    manifest = RunManifest.create("solve", directory, seed=1)
    if version is not None:
        manifest.tool_version = version
    manifest.write(directory)
    write_json(
        directory / "summary.json",
        {
            "values": [1.0, -1.0],
            "prior": [0.5, 0.5],
            "horizon": 0.25,
            "num_steps": num_steps,
            "num_paths": 200,
            "seed": 1,
            "solver": "grid",
            "converged": True,
            "iterations": 5,
            "delta_log": [0.1, 1e-9],
            "y0": [y0, y0],
        },
    )
    return directory


def test_solve_rows_sorted_by_refinement(tmp_path):
    fine = _solve_run(tmp_path, "fine", 16, 0.36)
    coarse = _solve_run(tmp_path, "coarse", 8, 0.35)
    tables = merge_runs([fine, coarse])

    rows = tables["solve"]
    assert [row["dt"] for row in rows] == pytest.approx([0.25 / 8, 0.25 / 16])
    assert rows[0]["instance"] == "N=2;v=[1,-1];p=[0.5,0.5];T=0.25"
    assert rows[0]["y0_change_1"] is None
    assert rows[1]["y0_change_1"] == pytest.approx(0.01)
    assert rows[1]["final_delta"] == pytest.approx(1e-9)


def test_tool_version_mismatch(tmp_path):
    first = _solve_run(tmp_path, "a", 8, 0.35)
    second = _solve_run(tmp_path, "b", 16, 0.36, version="0.0.0-old")
    with pytest.raises(ReportError) as excinfo:
        merge_runs([first, second])
    assert excinfo.value.offending == [second]

    tables = merge_runs([first, second], force=True)
    assert len(tables["solve"]) == 2


def test_empty_and_incomplete_inputs(tmp_path):
    with pytest.raises(ReportError):
        merge_runs([])

    broken = tmp_path / "broken"
    RunManifest.create("verify", broken).write(broken)
    with pytest.raises(ReportError, match="incomplete"):
        collect_run(broken)

    unknown = tmp_path / "unknown"
    write_json(unknown / "manifest.json", {"subcommand": "plot"})
    with pytest.raises(ReportError):
        collect_run(unknown)


def test_verify_rows(tmp_path):
    directory = tmp_path / "verify"
    manifest = RunManifest.create("verify", directory)
    manifest.instance = {"values": [1.0, -1.0], "prior": [0.5, 0.5], "horizon": 1.0}
    manifest.write(directory)
    write_json(
        directory / "certificate.json",
        {"dt": 0.125, "num_paths": 200, "seed": 5, "epsilon1": 0.4, "epsilon1_se": 0.0, "epsilon2": 0.0},
    )
    tables = merge_runs([directory])
    row = tables["verify"][0]
    assert row["instance"] == "N=2;v=[1,-1];p=[0.5,0.5];T=1"
    assert row["epsilon1"] == pytest.approx(0.4)
    assert row["epsilon"] is None


def test_write_report(tmp_path):
    run = _solve_run(tmp_path, "run", 8, 0.35)
    tables = merge_runs([run])
    written = write_report(tables, tmp_path / "out", inputs=[run])
    names = sorted(path.name for path in written)
    assert names == [REPORT_JSON, "report_solve.csv"]
    header = (tmp_path / "out" / "report_solve.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header.startswith("run,instance,dt,num_paths,seed,solver")
    assert "y0_change_2" in header
