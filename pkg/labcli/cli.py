"""Argparse-based command-line interface for the equilibrium laboratory."""

from __future__ import annotations

import argparse
import logging
import time
from dataclasses import asdict
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.bridge.gaussian import (
    RATE_COLUMNS,
    BridgeInstance,
    bridge_certificate,
    bridge_values,
    gaussian_fixed_point_check,
    truncation_rate,
)
from src.io.archive import load_solution, save_solution
from src.io.artifacts import RunManifest, write_csv, write_json
from src.io.report import ReportError, merge_runs, write_report
from src.levelset.duality import SearchSpec, duality_probe, write_membership_csv
from src.market.config import ConfigError, load_model_file, load_runtime_settings
from src.market.model import Discretization, MarketModel
from src.sim.paths import gen_paths
from src.sim.strategies import ConstantStrategy
from src.solvers.fbsde import PicardDivergenceError, picard_diagnostics, solve_fbsde
from src.utils.metrics import metrics
from src.utils.parallel import set_default_threads
from src.verify.certificate import ConstantPrice, FilterPrice, certify, certify_solution
from src.verify.markov import MIN_PATHS, equilibrium_markov_inputs, markov_test, toy_sg_paths

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGED = 2


class UsageError(ValueError):
    """Bad command-line arguments; mapped to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        raise UsageError(message)


def _configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, format="[%(levelname)s] %(message)s", force=True)
    LOGGER.debug("Logging configured (verbose=%s)", verbose)


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kyleback-lab", description="Kyle-Back insider-trading equilibrium laboratory.")
    parser.add_argument("--verbose", action="store_true", help="Enable verbose logging output.")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads (0 = auto; default from KYLEBACK_THREADS).")
    parser.add_argument("--out", type=Path, default=None, help="Output directory (default: $KYLEBACK_OUTPUT_ROOT/<subcommand>).")

    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    solve = subparsers.add_parser("solve", help="Solve the equilibrium FBSDE and write a solution archive.")
    solve.add_argument("--config", type=Path, required=True, help="Model config (YAML or JSON).")
    solve.add_argument("--solver", choices=("grid", "regress"), default="grid")

    verify = subparsers.add_parser("verify", help="Certify a pricing rule/strategy pair.")
    verify.add_argument("--config", type=Path, default=None, help="Model config; required with --pair.")
    source = verify.add_mutually_exclusive_group(required=True)
    source.add_argument("--solution", type=Path, help="Solution archive written by 'solve'.")
    source.add_argument("--pair", help="Explicit pair 'P=<level|filter>;theta=<r1,...,rN>'.")

    bridge = subparsers.add_parser("bridge", help="Truncation study of the Gaussian bridge equilibrium.")
    bridge.add_argument("--R", dest="levels", type=_float_list, default=[4.0, 16.0, 64.0])
    bridge.add_argument("--paths", type=int, default=100_000)
    bridge.add_argument("--seed", type=int, default=42)
    bridge.add_argument("--quadrature-nodes", type=int, default=64)
    bridge.add_argument("--grid-steps", type=int, default=256)
    bridge.add_argument("--fixed-point", type=_float_list, default=None, help="Also check the fixed-point identity at these t.")
    bridge.add_argument("--certificate", action="store_true", help="Also certify the truncated pair at the largest R.")

    levelset = subparsers.add_parser("levelset", help="Probe the zero level set of the auxiliary control value.")
    levelset.add_argument("--config", type=Path, default=None, help="Unused when --solution carries the model.")
    levelset.add_argument("--solution", type=Path, required=True)
    levelset.add_argument("--y-grid", required=True, help="Points 'a,b;c,d', or 'y0', 'y0+c', 'y0-c'.")
    levelset.add_argument("--search", action="store_true", help="Run the control search at every point.")
    levelset.add_argument("--search-evaluations", type=int, default=400)
    levelset.add_argument("--paths", type=int, default=None, help="Paths for the cost estimates (default: archive).")

    markov = subparsers.add_parser("markov-test", help="Regression test of the Markov property of a price.")
    markov.add_argument("--config", type=Path, default=None, help="Model config whose equilibrium price is tested.")
    markov.add_argument("--toy", choices=("appendix-sg", "brownian"), default=None, help="appendix-sg: S = ∫B ds + B against A = ∫B ds; brownian: S = B.")
    markov.add_argument("--paths", type=int, default=MIN_PATHS)
    markov.add_argument("--steps", type=int, default=64)
    markov.add_argument("--seed", type=int, default=42)
    markov.add_argument("--t", type=float, default=0.5)
    markov.add_argument("--delta", type=float, default=0.1)

    report = subparsers.add_parser("report", help="Merge run directories into plotting tables.")
    report.add_argument("--in", dest="inputs", type=Path, nargs="*", default=[])
    report.add_argument("--force", action="store_true", help="Merge despite tool-version mismatches.")

    return parser


# ----- Helpers -----


def _model_instance(model: MarketModel) -> Dict[str, Any]:
    return {
        "values": list(model.values),
        "prior": list(model.prior),
        "horizon": model.horizon,
        "cost": model.cost.variant,
    }


def _parse_pair(text: str, model: MarketModel) -> Tuple[ConstantPrice | FilterPrice, ConstantStrategy]:
    fields: Dict[str, str] = {}
    for part in text.split(";"):
        key, sep, value = part.partition("=")
        if not sep:
            raise UsageError(f"--pair: expected key=value, got {part!r}")
        fields[key.strip().lower()] = value.strip()
    if set(fields) != {"p", "theta"}:
        raise UsageError("--pair needs exactly the keys P and theta")
    try:
        rates = tuple(float(r) for r in fields["theta"].split(","))
    except ValueError as exc:
        raise UsageError(f"--pair: bad theta {fields['theta']!r}") from exc
    if len(rates) == 1:
        rates = rates * model.num_types
    if len(rates) != model.num_types:
        raise UsageError(f"--pair: theta has {len(rates)} rates for N={model.num_types}")
    strategy = ConstantStrategy(rates)
    if fields["p"].lower() == "filter":
        return FilterPrice(strategy), strategy
    try:
        return ConstantPrice(float(fields["p"])), strategy
    except ValueError as exc:
        raise UsageError(f"--pair: bad price {fields['p']!r}") from exc


def _parse_y_grid(text: str, y0: np.ndarray) -> List[List[float]]:
    points = []
    for token in (item.strip() for item in text.split(";")):
        if not token:
            continue
        if token.startswith("y0"):
            shift = token[2:].strip()
            try:
                offset = float(shift) if shift else 0.0
            except ValueError as exc:
                raise UsageError(f"--y-grid: bad shift in {token!r}") from exc
            points.append((y0 + offset).tolist())
            continue
        try:
            point = [float(item) for item in token.split(",")]
        except ValueError as exc:
            raise UsageError(f"--y-grid: bad point {token!r}") from exc
        if len(point) != y0.size:
            raise UsageError(f"--y-grid: point {token!r} has {len(point)} entries for N={y0.size}")
        points.append(point)
    if not points:
        raise UsageError("--y-grid is empty")
    return points


# ----- Subcommands -----


def _run_solve(args: argparse.Namespace, out: Path, manifest: RunManifest) -> int:
    model, disc, settings = load_model_file(args.config)
    manifest.seed = disc.seed
    manifest.instance = _model_instance(model)
    try:
        solution = solve_fbsde(model, disc, args.solver, settings=settings, threads=args.threads)
    except PicardDivergenceError as exc:
        LOGGER.error("%s", exc)
        metrics.extend("picard_delta", exc.delta_log)
        report = picard_diagnostics(exc)
        write_json(out / "picard_log.json", {"converged": False, **report.to_dict()})
        return EXIT_DIVERGED
    with metrics.stage("archive", paths=solution.disc.num_paths):
        save_solution(solution, out)
    print(f"Y0 = {np.array2string(solution.y0, precision=10)} after {solution.iterations} Picard iterations")
    return EXIT_OK


def _run_verify(args: argparse.Namespace, out: Path, manifest: RunManifest) -> int:
    if args.solution is not None:
        solution = load_solution(args.solution)
        manifest.seed = solution.disc.seed
        manifest.instance = _model_instance(solution.model)
        with metrics.stage("certify", paths=solution.disc.num_paths):
            certificate = certify_solution(solution)
    else:
        if args.config is None:
            raise UsageError("verify --pair needs a config")
        model, disc, settings = load_model_file(args.config)
        manifest.seed = disc.seed
        manifest.instance = _model_instance(model)
        rule, strategy = _parse_pair(args.pair, model)
        with metrics.stage("certify", paths=disc.num_paths):
            certificate = certify(model, rule, strategy, disc, settings=settings)
    certificate.to_json(out / "certificate.json")
    print(certificate.summary_line())
    return EXIT_OK


def _run_bridge(args: argparse.Namespace, out: Path, manifest: RunManifest) -> int:
    manifest.seed = args.seed
    manifest.instance = {"label": "gaussian-bridge", "levels": list(args.levels), "num_paths": args.paths}
    with metrics.stage("truncation_rate", paths=args.paths * len(args.levels)):
        rates = truncation_rate(
            args.levels,
            num_paths=args.paths,
            seed=args.seed,
            quadrature_nodes=args.quadrature_nodes,
            grid_steps=args.grid_steps,
            threads=args.threads,
        )
    write_csv(out / "rate_report.csv", RATE_COLUMNS, (row.as_list() for row in rates.rows))
    write_json(out / "rate_report.json", rates.to_dict())

    largest = BridgeInstance(
        truncation=max(args.levels),
        num_paths=args.paths,
        seed=args.seed,
        quadrature_nodes=args.quadrature_nodes,
        grid_steps=args.grid_steps,
    )
    with metrics.stage("bridge_values", paths=3 * args.paths):
        values = {f"{v:g}": asdict(bridge_values(v, largest, threads=args.threads)) for v in (-1.0, 0.0, 1.0)}
    write_json(out / "bridge_values.json", {"truncation": largest.truncation, "values": values})

    if args.fixed_point:
        disc = Discretization(num_steps=2048, num_paths=min(args.paths, 2000), seed=args.seed)
        bundle = gen_paths(disc, max(args.fixed_point), threads=args.threads)
        with metrics.stage("fixed_point", paths=bundle.num_paths):
            checks = gaussian_fixed_point_check(bundle, args.fixed_point, truncation=largest.truncation)
        write_json(out / "fixed_point.json", {"checks": [asdict(check) for check in checks]})
    if args.certificate:
        with metrics.stage("certify", paths=args.paths):
            certificate = bridge_certificate(largest, threads=args.threads)
        certificate.to_json(out / "certificate.json")
        print(certificate.summary_line())
    print(f"eps2 slope {rates.eps2_slope:.3f}, eta slope {rates.eta_slope:.3f}")
    return EXIT_OK


def _run_levelset(args: argparse.Namespace, out: Path, manifest: RunManifest) -> int:
    solution = load_solution(args.solution)
    manifest.seed = solution.disc.seed
    manifest.instance = _model_instance(solution.model)
    points = _parse_y_grid(args.y_grid, np.asarray(solution.y0, dtype=float))
    disc = solution.disc if args.paths is None else solution.disc.replace(num_paths=args.paths)
    bundle = gen_paths(disc, solution.model.horizon, threads=args.threads)
    spec = SearchSpec(max_evaluations=args.search_evaluations, threads=args.threads) if args.search else None
    with metrics.stage("duality_probe", paths=bundle.num_paths):
        membership = duality_probe(solution.model, solution, points, bundle=bundle, search_spec=spec)
    write_membership_csv(membership, out / "membership.csv")
    write_json(out / "membership.json", membership.to_dict())
    inside = sum(row.verdict == "in" for row in membership.rows)
    print(f"{inside}/{len(membership.rows)} candidates in the level set (tol {membership.level_tol:.3g})")
    return EXIT_OK


def _run_markov(args: argparse.Namespace, out: Path, manifest: RunManifest) -> int:
    disc = Discretization(num_steps=args.steps, num_paths=args.paths, seed=args.seed)
    manifest.seed = args.seed
    if args.toy is not None:
        manifest.instance = {"label": args.toy}
        price, auxiliary, times = toy_sg_paths(disc, threads=args.threads)
        if args.toy == "brownian":
            price = price - auxiliary
    elif args.config is not None:
        model, model_disc, settings = load_model_file(args.config)
        manifest.instance = _model_instance(model)
        disc = model_disc.replace(num_steps=args.steps, num_paths=args.paths, seed=args.seed)
        bundle = gen_paths(disc, model.horizon, threads=args.threads)
        solution = solve_fbsde(model, disc, "grid", settings=settings, bundle=bundle)
        price, auxiliary = equilibrium_markov_inputs(solution)
        times = bundle.times
    else:
        raise UsageError("markov-test needs a config or --toy")
    with metrics.stage("markov_test", paths=price.shape[0]):
        report = markov_test(price, auxiliary, times, args.t, args.delta)
    write_json(out / "markov_report.json", {"tests": [report.to_dict()]})
    print(f"coefficient {report.coefficient:.6g} (z={report.z_score:.2f}): {report.verdict}")
    return EXIT_OK


def _run_report(args: argparse.Namespace, out: Path, manifest: RunManifest) -> int:
    tables = merge_runs(args.inputs, force=args.force)
    written = write_report(tables, out, inputs=args.inputs)
    print("\n".join(str(path) for path in written))
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, Path, RunManifest], int]] = {
    "solve": _run_solve,
    "verify": _run_verify,
    "bridge": _run_bridge,
    "levelset": _run_levelset,
    "markov-test": _run_markov,
    "report": _run_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        logging.basicConfig(format="[%(levelname)s] %(message)s")
        LOGGER.error("%s", exc)
        return EXIT_USAGE
    _configure_logging(args.verbose)

    try:
        runtime = load_runtime_settings()
    except ValueError as exc:
        LOGGER.error("%s", exc)
        return EXIT_USAGE
    if args.threads is None:
        args.threads = runtime.threads
    if args.threads < 0:
        LOGGER.error("--threads must be >= 0")
        return EXIT_USAGE
    set_default_threads(args.threads)

    out = args.out if args.out is not None else runtime.output_root / args.command
    out.mkdir(parents=True, exist_ok=True)
    config_path = getattr(args, "config", None)
    manifest = RunManifest.create(args.command, out, config_path=config_path, threads=args.threads)
    metrics.reset()
    started = time.perf_counter()

    LOGGER.debug("Dispatching command: %s", args.command)
    try:
        code = COMMANDS[args.command](args, out, manifest)
    except (ConfigError, UsageError, ReportError, FileNotFoundError, ValueError) as exc:
        LOGGER.error("%s", exc)
        code = EXIT_USAGE
    manifest.finish(metrics, time.perf_counter() - started, code)
    manifest.write(out)
    return code


__all__ = ["COMMANDS", "EXIT_DIVERGED", "EXIT_OK", "EXIT_USAGE", "build_parser", "main"]
