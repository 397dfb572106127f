import json
import math
from pathlib import Path

import pytest

from main import main
from models import ScenarioError, load_scenario, parse_scenario
from oscillator.orchestrator import (
    EXIT_IO,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_SCHEMA,
    build_state,
    execute_scenario,
    run_scenario,
)
from services.export_service import format_number, sidecar_path


SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _strip_timings(path: Path) -> dict:
    meta = json.loads(path.read_text(encoding="utf-8"))
    meta.pop("timings_ms")
    return meta


# ----- schema -----

def test_unknown_key_is_rejected():
    with pytest.raises(ScenarioError, match="colour"):
        parse_scenario({"profile": {"kind": "free"}, "t_end": 1.0, "dt_out": 0.1,
                        "outputs": ["trajectory_csv"], "colour": "red"})


@pytest.mark.parametrize("data", [
    {"profile": {"kind": "step"}, "t_end": 1.0, "dt_out": 0.1, "outputs": ["trajectory_csv"]},
    {"profile": {"kind": "constant", "omega0": 2.0}, "t_end": 1.0, "dt_out": 0.1, "outputs": ["trajectory_csv"]},
    {"profile": {"kind": "free"}, "t_end": 1.0, "dt_out": 2.0, "outputs": ["trajectory_csv"]},
    {"profile": {"kind": "free"}, "t_end": 1.0, "dt_out": 0.1, "outputs": ["wavefunction_csv"]},
    {"profile": {"kind": "free"}, "t_end": 1.0, "dt_out": 0.1, "outputs": ["wavefunction_csv"],
     "states": [{"kind": "number"}]},
    {"profile": {"kind": "free"}, "t_end": 1.0, "dt_out": 0.1, "outputs": ["wavefunction_csv"],
     "states": [{"kind": "coherent", "alpha": [7.0, 0.0]}]},
])
def test_invalid_scenarios(data):
    with pytest.raises(ScenarioError):
        parse_scenario(data)


def test_scenario_hash_is_canonical():
    a = parse_scenario({"profile": {"kind": "free"}, "t_end": 1.0, "dt_out": 0.1, "outputs": ["trajectory_csv"]})
    b = parse_scenario({"outputs": ["trajectory_csv"], "dt_out": 0.1, "t_end": 1.0, "profile": {"kind": "free"}})
    assert a.sha256 == b.sha256


def test_format_number():
    assert format_number(0.0) == "0"
    assert format_number(-0.0) == "0"
    assert format_number(True) == "1"
    assert format_number(3) == "3"
    assert format_number(1 / 3) == "0.333333333333333"


# ----- orchestrator -----

@pytest.mark.asyncio
async def test_step_scenario_squeezes_to_an_eighth(tmp_path):
    scenario, sha = load_scenario(SCENARIOS / "step2.json")
    run = await execute_scenario(scenario, tmp_path, sha)

    assert run.ok, run.errors
    assert run.summary["squeezing"]["min_sigma_x"] == pytest.approx(0.125, abs=1e-6)
    assert run.summary["squeezing"]["any_squeezed"]
    assert run.summary["wronskian_residual"] < 1e-8

    names = {p.name for p in run.artifacts}
    assert {"trajectory.csv", "squeezing.csv", "wavefunction_00_ground.csv", "wavefunction_01_even_cat.csv"} <= names
    for name in ("trajectory.csv", "squeezing.csv"):
        meta = json.loads(sidecar_path(tmp_path / name).read_text(encoding="utf-8"))
        assert meta["scenario_sha256"] == sha
        assert set(meta) >= {"tool_version", "tolerances", "timings_ms"}

    cat = run.summary["states"][1]
    assert cat["t"] == pytest.approx(math.pi / 4)
    assert cat["eigen_residual"] < 1e-5
    assert cat["sigma_x"] < 0.5


@pytest.mark.asyncio
async def test_constant_scenario_never_squeezes(tmp_path):
    scenario, sha = load_scenario(SCENARIOS / "constant.json")
    run = await execute_scenario(scenario, tmp_path, sha)
    assert run.ok, run.errors
    assert not run.summary["squeezing"]["any_squeezed"]


@pytest.mark.asyncio
@pytest.mark.parametrize("name", ["constant.json", "modulated.json", "tabulated.json"])
async def test_bundled_trajectory_scenarios_keep_the_wronskian(name, tmp_path):
    scenario, sha = load_scenario(SCENARIOS / name)
    run = await execute_scenario(scenario, tmp_path, sha)
    assert run.ok, run.errors
    assert run.summary["wronskian_residual"] < 1e-9

    lines = (tmp_path / "trajectory.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0].split(",")[-1] == "wronskian_residual"
    assert max(float(line.split(",")[-1]) for line in lines[1:]) < 1e-9
    for state in run.summary["states"]:
        assert state["norm"] == pytest.approx(1.0, abs=1e-6)
        assert state["eigen_residual"] < 1e-5


@pytest.mark.asyncio
async def test_qdeform_scenario(tmp_path):
    scenario, sha = load_scenario(SCENARIOS / "qcheck.json")
    run = await execute_scenario(scenario, tmp_path, sha)
    assert run.ok, run.errors
    assert "trajectory" not in run.timings_ms
    report = json.loads((tmp_path / "qreport.json").read_text(encoding="utf-8"))
    assert report["qcommutator_residual"] < 1e-10
    assert report["qcoherent"]["eigen_residual"] < 1e-10


@pytest.mark.asyncio
async def test_numerical_failure_sets_exit_code(tmp_path):
    # a grid too narrow for the coherent state fails the adequacy check
    scenario = parse_scenario({
        "profile": {"kind": "free"}, "t_end": 1.0, "dt_out": 0.1,
        "grid": {"x_min": -2.0, "x_max": 2.0, "n_points": 401},
        "states": [{"kind": "coherent", "alpha": [2.0, 0.0]}],
        "outputs": ["wavefunction_csv"],
    })
    run = await execute_scenario(scenario, tmp_path)
    assert run.exit_code == EXIT_NUMERICAL
    assert "state_00" in run.errors
    assert not run.artifacts


def test_build_state_number(step2_trajectory):
    scenario = parse_scenario({
        "profile": {"kind": "step", "omega1": 2.0}, "t_end": math.pi, "dt_out": math.pi / 400,
        "states": [{"kind": "number", "n": 3, "t": 1.0}], "outputs": ["wavefunction_csv"],
    })
    wf, summary = build_state(scenario.states[0], step2_trajectory)
    assert summary["norm"] == pytest.approx(1.0, abs=1e-6)
    assert summary["eigen_residual"] < 1e-6
    assert wf.label.startswith("number")


def test_run_is_byte_deterministic(tmp_path):
    first = run_scenario(SCENARIOS / "step2.json", tmp_path / "a")
    second = run_scenario(SCENARIOS / "step2.json", tmp_path / "b")
    assert first.ok and second.ok
    for path in first.artifacts:
        other = tmp_path / "b" / path.name
        if path.name.endswith(".meta.json"):
            assert _strip_timings(path) == _strip_timings(other)
        else:
            assert path.read_bytes() == other.read_bytes()


def test_schema_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"profile": {"kind": "free"}, "t_end": 1.0, "dt_out": 0.1,
                               "outputs": ["trajectory_csv"], "extra": 1}), encoding="utf-8")
    run = run_scenario(bad, tmp_path / "out")
    assert run.exit_code == EXIT_SCHEMA
    assert not (tmp_path / "out").exists()
    assert main(["run", str(bad), "--out", str(tmp_path / "out")]) == EXIT_SCHEMA


def test_unwritable_output_exit_code(tmp_path):
    blocker = tmp_path / "occupied"
    blocker.write_text("not a directory", encoding="utf-8")
    assert main(["run", str(SCENARIOS / "qcheck.json"), "--out", str(blocker)]) == EXIT_IO


# ----- command line -----

def test_cli_qdeform(tmp_path, capsys):
    code = main(["qdeform", "--lambda", "0.6931471805599453", "--n-max", "32", "--alpha", "0.5", "0", "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert (tmp_path / "qreport.json").exists()
    assert sidecar_path(tmp_path / "qreport.json").exists()
    assert "qreport.json" in capsys.readouterr().out


def test_cli_evolve_and_squeeze(tmp_path):
    args = ["--profile", "step", "--omega1", "2", "--t-end", "3.141592653589793", "--dt-out", "0.0314159"]
    assert main(["evolve", *args, "--out", str(tmp_path)]) == EXIT_OK
    assert main(["squeeze", *args, "--out", str(tmp_path)]) == EXIT_OK
    header = (tmp_path / "squeezing.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "t,sigma_x,sigma_p,corr,squeezed"
    header = (tmp_path / "trajectory.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "t,re_eps,im_eps,re_deps,im_deps,wronskian_residual"


def test_cli_states(tmp_path):
    code = main(["states", "--profile", "free", "--t-end", "1", "--dt-out", "0.1",
                 "--kind", "cat", "--parity", "odd", "--alpha", "1.2", "0", "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert (tmp_path / "wavefunction_00_odd_cat.csv").exists()
    lines = (tmp_path / "wavefunction_00_odd_cat.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "x,re_psi,im_psi,abs2"
    assert len(lines[1].split(",")) == 4


def test_cli_overlap(tmp_path):
    spec = tmp_path / "overlap.json"
    spec.write_text(json.dumps({"R_her": [[2.0]], "r_her": [[2.0]], "Lambda": [[1.0]], "M_quad": [[1.0]],
                                "c": [0.0], "d": [0.5], "n": [0], "m": [1]}), encoding="utf-8")
    assert main(["overlap", "--spec", str(spec), "--out", str(tmp_path / "out")]) == EXIT_OK
    payload = json.loads((tmp_path / "out" / "overlap.json").read_text(encoding="utf-8"))
    assert payload["value"] == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    assert payload["printed_value"] == pytest.approx(0.5 * math.sqrt(math.pi), rel=1e-12)
    assert payload["rel_err"] < 1e-9


def test_cli_franck_condon(tmp_path):
    code = main(["fc", "--profile", "step", "--omega1", "2", "--t-end", "1", "--dt-out", "0.1",
                 "--n-max", "3", "--out", str(tmp_path)])
    assert code == EXIT_OK
    lines = (tmp_path / "franck_condon.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + 16
    meta = json.loads(sidecar_path(tmp_path / "franck_condon.csv").read_text(encoding="utf-8"))
    assert meta["summary"]["max_disagreement"] < 1e-6


def test_trajectory_csv_columns(tmp_path):
    assert main(["evolve", "--profile", "constant", "--t-end", "1", "--dt-out", "0.5", "--out", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "trajectory.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,re_eps,im_eps,re_deps,im_deps,wronskian_residual"
    assert lines[1].split(",")[:5] == ["0", "1", "0", "0", "1"]
    assert len(lines) == 1 + 3
