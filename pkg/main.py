"""
ParamLab — Main Entry Point

Command-line scenario runner:

    python main.py evolve  --profile step --omega1 2 --t-end 10 --dt-out 0.01 --out out/
    python main.py squeeze --profile step --omega1 2 --t-end 3.14159 --dt-out 0.00785 --out out/
    python main.py states  --profile free --t-end 1 --dt-out 0.1 --kind coherent --alpha 1 0 --out out/
    python main.py qdeform --lambda 0.693147 --n-max 64 --out out/
    python main.py overlap --spec overlap.json --n 1 --m 1 --out out/
    python main.py fc      --profile step --omega1 2 --t-end 1 --dt-out 0.1 --n-max 6 --out out/
    python main.py run     scenarios/step2.json --out out/

Exit codes: 0 success, 2 schema error, 3 numerical failure, 4 I/O failure.
"""

import argparse
import asyncio
import json
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

from loguru import logger

from config import get_settings
from models import ScenarioError, parse_scenario
from oscillator.numerics import LabError
from oscillator.orchestrator import (
    EXIT_IO,
    EXIT_OK,
    EXIT_SCHEMA,
    ScenarioRun,
    execute_scenario,
    exit_code_for,
    run_scenario,
)
from oscillator.trajectory import solve_epsilon
from oscillator.mvhermite import franck_condon_matrix
from services import export_service


def setup_logging(level: Optional[str] = None) -> None:
    settings = get_settings()
    level = (level or settings.log_level).upper()
    logger.remove()
    # stderr: stdout stays clean for artifact listings
    logger.add(
        sys.stderr,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level:<8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>",
        level=level,
    )
    logger.debug(f"Logging configured at level: {level}")


# =====================================================================
# Argument parsing
# =====================================================================

def _add_profile_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("frequency profile")
    group.add_argument("--profile", default="constant",
                       choices=["constant", "free", "step", "modulated", "tabulated"])
    group.add_argument("--omega0", type=float, default=1.0)
    group.add_argument("--omega1", type=float)
    group.add_argument("--t-switch", type=float, default=0.0)
    group.add_argument("--kappa", type=float)
    group.add_argument("--nu", type=float)
    group.add_argument("--table", type=Path, help="JSON file {\"times\": [...], \"omega_sq\": [...]}")
    group.add_argument("--t-end", type=float, required=True)
    group.add_argument("--dt-out", type=float, required=True)
    group.add_argument("--tol", type=float, default=None, help="solver tolerance (default from settings)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paramlab", description="Parametric oscillator laboratory")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    evolve = sub.add_parser("evolve", help="integrate eps(t) and write trajectory.csv")
    _add_profile_args(evolve)

    squeeze = sub.add_parser("squeeze", help="write squeezing.csv (analytic moments along eps(t))")
    _add_profile_args(squeeze)

    states = sub.add_parser("states", help="build one wavefunction and write it with its diagnostics")
    _add_profile_args(states)
    states.add_argument("--kind", required=True, choices=["ground", "coherent", "number", "cat", "qcoherent"])
    states.add_argument("--alpha", type=float, nargs=2, default=(0.0, 0.0), metavar=("RE", "IM"))
    states.add_argument("--n", type=int)
    states.add_argument("--parity", choices=["even", "odd"])
    states.add_argument("--lambda", dest="lam", type=float)
    states.add_argument("--n-max", type=int)
    states.add_argument("--t", type=float, help="evaluation time (default t_end)")

    qdeform = sub.add_parser("qdeform", help="verify the deformed algebra and write qreport.json")
    qdeform.add_argument("--lambda", dest="lam", type=float, required=True)
    qdeform.add_argument("--n-max", type=int, default=64)
    qdeform.add_argument("--alpha", type=float, nargs=2, metavar=("RE", "IM"))

    overlap = sub.add_parser("overlap", help="closed-form Gaussian overlap against quadrature")
    overlap.add_argument("--spec", type=Path, required=True, help="OverlapSpec JSON (R_her, r_her, Lambda, M_quad, c, d)")
    overlap.add_argument("--n", type=int, nargs="+")
    overlap.add_argument("--m", type=int, nargs="+")
    overlap.add_argument("--convention", choices=["resolved", "printed"])
    overlap.add_argument("--order", choices=["nm", "mn"])

    fc = sub.add_parser("fc", help="Franck-Condon amplitude matrix, grid and kernel paths")
    _add_profile_args(fc)
    fc.add_argument("--n-max", type=int, default=6)
    fc.add_argument("--t", type=float, help="sample time (default t_end)")

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario", type=Path)

    for p in (evolve, squeeze, states, qdeform, overlap, fc, run):
        p.add_argument("--out", type=Path, required=True, help="output directory")
    return parser


# =====================================================================
# Scenario assembly
# =====================================================================

def _profile_dict(args: argparse.Namespace) -> Dict[str, Any]:
    profile: Dict[str, Any] = {"kind": args.profile}
    if args.profile == "constant":
        profile["omega0"] = args.omega0
    elif args.profile == "step":
        profile["omega1"] = args.omega1
        profile["t_switch"] = args.t_switch
    elif args.profile == "modulated":
        profile["kappa"] = args.kappa
        profile["nu"] = args.nu
    elif args.profile == "tabulated":
        if args.table is None:
            raise ScenarioError("--profile tabulated needs --table")
        try:
            table = json.loads(args.table.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ScenarioError(f"Cannot read profile table {args.table}: {e}")
        profile["times"] = table.get("times")
        profile["omega_sq"] = table.get("omega_sq")
    return profile


def _base_scenario(args: argparse.Namespace, outputs: List[str]) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        "profile": _profile_dict(args),
        "t_end": args.t_end,
        "dt_out": args.dt_out,
        "outputs": outputs,
    }
    if args.tol is not None:
        data["solver_tol"] = args.tol
    return data


def scenario_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Translate subcommand flags into the scenario schema."""
    if args.command == "evolve":
        return _base_scenario(args, ["trajectory_csv"])
    if args.command == "squeeze":
        return _base_scenario(args, ["squeezing_csv"])
    if args.command == "states":
        data = _base_scenario(args, ["wavefunction_csv"])
        state: Dict[str, Any] = {"kind": args.kind, "alpha": list(args.alpha)}
        for key, value in (("n", args.n), ("parity", args.parity), ("lambda", args.lam),
                           ("n_max", args.n_max), ("t", args.t)):
            if value is not None:
                state[key] = value
        data["states"] = [state]
        return data
    if args.command == "qdeform":
        qdeform: Dict[str, Any] = {"lambda": args.lam, "n_max": args.n_max}
        if args.alpha is not None:
            qdeform["alpha"] = list(args.alpha)
        # no trajectory is integrated for this output
        return {"profile": {"kind": "constant"}, "t_end": 1.0, "dt_out": 1.0,
                "qdeform": qdeform, "outputs": ["qreport_json"]}
    if args.command == "overlap":
        try:
            overlap = json.loads(args.spec.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ScenarioError(f"Cannot read overlap spec {args.spec}: {e}")
        if not isinstance(overlap, dict):
            raise ScenarioError(f"Overlap spec {args.spec} must be a JSON object")
        for key, value in (("n", args.n), ("m", args.m), ("convention", args.convention), ("order", args.order)):
            if value is not None:
                overlap[key] = value
        return {"profile": {"kind": "constant"}, "t_end": 1.0, "dt_out": 1.0,
                "overlap": overlap, "outputs": ["overlap_json"]}
    raise ScenarioError(f"No scenario mapping for command {args.command}")


# =====================================================================
# Commands
# =====================================================================

def run_fc(args: argparse.Namespace) -> ScenarioRun:
    """Franck-Condon matrix between the t=0 basis and the basis at --t."""
    run = ScenarioRun(out_dir=args.out)
    data = _base_scenario(args, ["trajectory_csv"])
    scenario = parse_scenario(data)
    try:
        start = time.perf_counter()
        traj = solve_epsilon(scenario.profile.build(), scenario.t_end, scenario.dt_out, scenario.solver_tol)
        sample = traj.sample(len(traj) - 1) if args.t is None else traj.sample_at(args.t)
        matrix = franck_condon_matrix(args.n_max, sample)
        run.timings_ms["fc"] = (time.perf_counter() - start) * 1000.0
    except LabError as e:
        run.fail("fc", e)
        return run

    disagreements = [amp.disagreement for row in matrix for amp in row if amp.disagreement is not None]
    summary = {
        "t": sample.t,
        "n_max": args.n_max,
        "max_disagreement": max(disagreements) if disagreements else None,
    }
    run.summary.update(summary)
    try:
        header, rows = export_service.franck_condon_rows(matrix)
        path = export_service.write_csv(Path(args.out) / "franck_condon.csv", header, rows)
        settings = get_settings()
        tolerances = {"solver_tol": scenario.solver_tol, "grid_edge_threshold": settings.grid_edge_threshold}
        run.artifacts.append(path)
        run.artifacts.append(export_service.write_sidecar(path, scenario.sha256, tolerances, run.timings_ms, summary))
    except LabError as e:
        run.fail("export", e)
    return run


def dispatch(args: argparse.Namespace) -> ScenarioRun:
    if args.command == "run":
        return run_scenario(args.scenario, args.out)
    if args.command == "fc":
        return run_fc(args)
    scenario = parse_scenario(scenario_from_args(args))
    return asyncio.run(execute_scenario(scenario, args.out))


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    try:
        run = dispatch(args)
    except ScenarioError as e:
        logger.error(str(e))
        return EXIT_SCHEMA
    except OSError as e:
        logger.error(f"I/O failure: {e}")
        return EXIT_IO
    except LabError as e:
        logger.error(str(e))
        return exit_code_for(e)

    for path in run.artifacts:
        print(path)
    if run.exit_code != EXIT_OK:
        logger.error(f"Failed stages: {', '.join(run.errors)} (exit {run.exit_code})")
    return run.exit_code


if __name__ == "__main__":
    sys.exit(main())
