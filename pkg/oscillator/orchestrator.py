"""
ParamLab Scenario Orchestrator

The single entry point that runs a scenario end to end and writes its
artifacts.

Flow:
    1. Integrate the mode function eps(t) (only when something needs it)
    2. Evaluate state requests, squeezing, q-report and overlap concurrently
    3. Write artifacts in a fixed order, each with its metadata sidecar

Usage:
    from oscillator.orchestrator import run_scenario
    run = run_scenario("scenarios/step2.json", "out/")
    sys.exit(run.exit_code)
"""

import asyncio
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from loguru import logger

from config import get_settings
from models import Scenario, ScenarioError, StateRequest, load_scenario
from oscillator.numerics import InputError, SpatialGrid
from oscillator.trajectory import EpsilonTrajectory, TrajectorySample, solve_epsilon
from oscillator.states import (
    WaveFunction,
    cat_state,
    coherent_state,
    eigen_residual,
    fock_synthesize,
    ground_state,
    moments,
    number_expectation,
    number_state,
    squeezing_series,
)
from oscillator.qdeform import qcoherent_coeffs, qreport
from oscillator.mvhermite import (
    MAX_ORACLE_ORDER,
    MultiIndex,
    gaussian_overlap,
    overlap_oracle,
)
from services import export_service
from services.export_service import ExportError


EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


# =====================================================================
# Result
# =====================================================================

@dataclass
class ScenarioRun:
    """Outcome of one scenario run."""

    out_dir: Path
    artifacts: List[Path] = field(default_factory=list)
    timings_ms: Dict[str, float] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)

    # Errors (per stage)
    errors: Dict[str, str] = field(default_factory=dict)
    exit_code: int = EXIT_OK

    @property
    def ok(self) -> bool:
        return self.exit_code == EXIT_OK

    def fail(self, stage: str, exc: BaseException) -> None:
        """Record a failed stage; the first failure fixes the exit code."""
        self.errors[stage] = str(exc)
        logger.error(f"Stage {stage} failed: {exc}")
        if self.exit_code == EXIT_OK:
            self.exit_code = exit_code_for(exc)


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ScenarioError, InputError)):
        return EXIT_SCHEMA
    if isinstance(exc, (ExportError, OSError)):
        return EXIT_IO
    return EXIT_NUMERICAL


# =====================================================================
# Stages
# =====================================================================

def build_state(
    request: StateRequest,
    traj: EpsilonTrajectory,
    grid: Optional[SpatialGrid] = None,
) -> Tuple[WaveFunction, Dict[str, Any]]:
    """Wavefunction for one request plus its diagnostics."""
    sample: TrajectorySample = traj.sample(len(traj) - 1) if request.t is None else traj.sample_at(request.t)
    alpha = request.alpha_complex

    if request.kind == "ground":
        wf = ground_state(sample, grid)
        eigen = eigen_residual(wf, 0.0)
    elif request.kind == "coherent":
        wf = coherent_state(alpha, sample, grid)
        eigen = eigen_residual(wf, alpha)
    elif request.kind == "number":
        wf = number_state(request.n, sample, grid)
        eigen = abs(number_expectation(wf) - request.n)
    elif request.kind == "cat":
        wf = cat_state(request.parity, alpha, sample, grid)
        eigen = eigen_residual(wf, alpha ** 2, power=2)
    else:
        coeffs = qcoherent_coeffs(alpha, request.lam, request.n_max)
        wf = fock_synthesize(coeffs, sample, grid, label=f"qcoherent lambda={request.lam}")
        eigen = None

    m = moments(wf)
    summary = {
        "label": wf.label,
        "t": sample.t,
        "n_points": wf.grid.n_points,
        "norm": wf.norm,
        "mean_x": m.mean_x,
        "mean_p": m.mean_p,
        "sigma_x": m.sigma_x,
        "sigma_p": m.sigma_p,
        "sigma_xp": m.sigma_xp,
        "corr": m.corr,
        "schrodinger_residual": m.schrodinger_residual,
    }
    if eigen is not None:
        summary["eigen_residual"] = eigen
    return wf, summary


def evaluate_overlap(scenario: Scenario) -> Dict[str, Any]:
    """Closed-form overlap, cross-checked by quadrature when within the oracle budget."""
    req = scenario.overlap
    spec = req.build()
    n, m = MultiIndex.of(req.n), MultiIndex.of(req.m)
    value = gaussian_overlap(spec, n, m, req.convention, req.order)
    other = "printed" if req.convention == "resolved" else "resolved"

    payload: Dict[str, Any] = {
        "spec": spec.to_dict(),
        "n": list(n.entries),
        "m": list(m.entries),
        "convention": req.convention,
        "order": req.order,
        "value": value,
        f"{other}_value": gaussian_overlap(spec, n, m, other, req.order),
        "oracle_value": None,
        "rel_err": None,
    }
    if spec.dim <= 2 and n.total + m.total <= MAX_ORACLE_ORDER:
        oracle = overlap_oracle(spec, n, m)
        payload["oracle_value"] = oracle
        payload["rel_err"] = abs(value - oracle) / max(abs(oracle), 1.0)
    return payload


async def _timed(run: ScenarioRun, stage: str, func, *args):
    start = time.perf_counter()
    try:
        return await asyncio.to_thread(func, *args)
    finally:
        run.timings_ms[stage] = (time.perf_counter() - start) * 1000.0


# =====================================================================
# Orchestrator
# =====================================================================

async def execute_scenario(
    scenario: Scenario,
    out_dir: Path,
    scenario_sha256: Optional[str] = None,
) -> ScenarioRun:
    """
    Run a validated scenario.

    Stage failures are caught per stage into `errors`; nothing is written
    once a stage has failed, and the first failure fixes the exit code.
    """
    settings = get_settings()
    out_dir = Path(out_dir)
    run = ScenarioRun(out_dir=out_dir)
    sha = scenario_sha256 or scenario.sha256
    tolerances = {
        "solver_tol": scenario.solver_tol,
        "wronskian_tol": settings.wronskian_tol,
        "quad_tol": settings.quad_tol,
        "grid_edge_threshold": settings.grid_edge_threshold,
    }
    grid = scenario.grid.build() if scenario.grid is not None else None

    # --- Phase 1: trajectory ---
    traj: Optional[EpsilonTrajectory] = None
    if scenario.needs_trajectory:
        try:
            profile = scenario.profile.build()
            traj = await _timed(
                run, "trajectory", solve_epsilon, profile, scenario.t_end, scenario.dt_out, scenario.solver_tol,
            )
            run.summary["wronskian_residual"] = traj.certify()
            logger.info(f"Trajectory ({profile.kind}): {len(traj)} samples, residual {run.summary['wronskian_residual']:.2e}")
        except Exception as e:
            run.fail("trajectory", e)
            return run

    # --- Phase 2: independent stages (parallel) ---
    semaphore = asyncio.Semaphore(settings.max_workers)

    async def _limited(stage: str, func, *args):
        async with semaphore:
            return await _timed(run, stage, func, *args)

    tasks: Dict[str, Any] = {}
    for i, request in enumerate(scenario.states):
        tasks[f"state_{i:02d}"] = _limited(f"state_{i:02d}", build_state, request, traj, grid)
    if "squeezing_csv" in scenario.outputs:
        tasks["squeezing"] = _limited("squeezing", squeezing_series, traj)
    if scenario.qdeform is not None:
        q = scenario.qdeform
        alpha = complex(*q.alpha) if q.alpha is not None else None
        tasks["qdeform"] = _limited("qdeform", qreport, q.lam, q.n_max, alpha)
    if scenario.overlap is not None:
        tasks["overlap"] = _limited("overlap", evaluate_overlap, scenario)

    keys = list(tasks.keys())
    results = await asyncio.gather(*tasks.values(), return_exceptions=True)
    outcome: Dict[str, Any] = {}
    for key, result in zip(keys, results):
        if isinstance(result, Exception):
            run.fail(key, result)
        else:
            outcome[key] = result
    if not run.ok:
        return run

    # --- Phase 3: artifacts (serialized, fixed order) ---
    try:
        _write_artifacts(run, scenario, traj, outcome, sha, tolerances)
    except Exception as e:
        run.fail("export", e)
    return run


def _write_artifacts(
    run: ScenarioRun,
    scenario: Scenario,
    traj: Optional[EpsilonTrajectory],
    outcome: Dict[str, Any],
    sha: str,
    tolerances: Dict[str, float],
) -> None:
    out = run.out_dir

    def emit(path: Path, stage: str, summary: Optional[Dict[str, Any]] = None) -> None:
        timings = {stage: run.timings_ms.get(stage, 0.0)}
        if traj is not None and stage != "trajectory":
            timings["trajectory"] = run.timings_ms.get("trajectory", 0.0)
        run.artifacts.append(path)
        run.artifacts.append(export_service.write_sidecar(path, sha, tolerances, timings, summary))

    if "trajectory_csv" in scenario.outputs:
        header, rows = export_service.trajectory_rows(traj)
        path = export_service.write_csv(out / "trajectory.csv", header, rows)
        emit(path, "trajectory", {"profile": traj.profile.describe(), "wronskian_residual": run.summary["wronskian_residual"]})

    if "squeezing_csv" in scenario.outputs:
        series = outcome["squeezing"]
        header, rows = export_service.squeezing_rows(series)
        path = export_service.write_csv(out / "squeezing.csv", header, rows)
        summary = {"min_sigma_x": series.min_sigma_x, "t_min": series.t_min, "any_squeezed": series.any_squeezed}
        run.summary["squeezing"] = summary
        emit(path, "squeezing", summary)

    state_summaries = []
    for i, request in enumerate(scenario.states):
        wf, summary = outcome[f"state_{i:02d}"]
        state_summaries.append(summary)
        if "wavefunction_csv" in scenario.outputs:
            header, rows = export_service.wavefunction_rows(wf)
            path = export_service.write_csv(out / f"wavefunction_{i:02d}_{request.label}.csv", header, rows)
            emit(path, f"state_{i:02d}", summary)
    if state_summaries:
        run.summary["states"] = state_summaries

    if "qreport_json" in scenario.outputs:
        report = outcome["qdeform"]
        run.summary["qcommutator_residual"] = report["qcommutator_residual"]
        emit(export_service.write_json(out / "qreport.json", report), "qdeform")

    if "overlap_json" in scenario.outputs:
        payload = outcome["overlap"]
        run.summary["overlap"] = {k: payload[k] for k in ("value", "oracle_value", "rel_err")}
        emit(export_service.write_json(out / "overlap.json", payload), "overlap")

    logger.info(f"Wrote {len(run.artifacts)} artifacts to {out}")


def run_scenario(scenario_file: Path, out_dir: Path) -> ScenarioRun:
    """Load, validate and run a scenario file."""
    try:
        scenario, sha = load_scenario(Path(scenario_file))
    except ScenarioError as e:
        run = ScenarioRun(out_dir=Path(out_dir))
        run.fail("schema", e)
        return run
    logger.info(f"Running scenario {scenario_file} (sha256 {sha[:12]})")
    return asyncio.run(execute_scenario(scenario, Path(out_dir), sha))
