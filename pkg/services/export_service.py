"""
Export service — all table and report formatting in one place.

Every artifact is written with a header row (CSV) or sorted keys (JSON)
and a `<artifact>.meta.json` sidecar, so identical inputs give identical
bytes apart from the timing field.
"""

import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from config import get_settings
from oscillator import __version__ as TOOL_VERSION
from oscillator.numerics import LabError
from oscillator.trajectory import EpsilonTrajectory
from oscillator.states import SqueezingSeries, WaveFunction

Table = Tuple[List[str], List[List[Any]]]


class ExportError(LabError):
    """An artifact could not be written."""
    pass


# =====================================================================
# Formatting
# =====================================================================

def format_number(value: Any, digits: Optional[int] = None) -> str:
    """Fixed significant digits for floats, plain text otherwise."""
    digits = get_settings().csv_digits if digits is None else digits
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if value == 0.0:
            return "0"  # no negative zero
        return f"{value:.{digits}g}"
    return str(value)


def _plain(value: Any) -> Any:
    """numpy / complex values to JSON-native ones."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value


# =====================================================================
# Tables
# =====================================================================

def trajectory_rows(traj: EpsilonTrajectory) -> Table:
    header = ["t", "re_eps", "im_eps", "re_deps", "im_deps", "wronskian_residual"]
    defects = traj.wronskian_defects()
    rows = [
        [traj.times[i], traj.eps[i].real, traj.eps[i].imag, traj.deps[i].real, traj.deps[i].imag, defects[i]]
        for i in range(len(traj))
    ]
    return header, rows


def squeezing_rows(series: SqueezingSeries) -> Table:
    header = ["t", "sigma_x", "sigma_p", "corr", "squeezed"]
    rows = [
        [series.times[i], series.sigma_x[i], series.sigma_p[i], series.corr[i], bool(series.squeezed[i])]
        for i in range(len(series.times))
    ]
    return header, rows


def wavefunction_rows(wf: WaveFunction) -> Table:
    header = ["x", "re_psi", "im_psi", "abs2"]
    x = wf.grid.points
    rows = [[x[i], wf.values[i].real, wf.values[i].imag, abs(wf.values[i]) ** 2] for i in range(len(x))]
    return header, rows


def franck_condon_rows(matrix: Sequence[Sequence[Any]]) -> Table:
    header = ["n", "m", "amp_re", "amp_im", "probability", "reduced_re", "reduced_im", "disagreement"]
    rows = []
    for row in matrix:
        for amp in row:
            reduced = amp.reduced if amp.reduced is not None else complex("nan")
            disagreement = amp.disagreement if amp.disagreement is not None else float("nan")
            rows.append([amp.n, amp.m, amp.value.real, amp.value.imag, amp.probability,
                         reduced.real, reduced.imag, disagreement])
    return header, rows


# =====================================================================
# Writers
# =====================================================================

def write_csv(path: Path, header: List[str], rows: Iterable[Sequence[Any]], digits: Optional[int] = None) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_number(v, digits) for v in row])
    except OSError as e:
        raise ExportError(f"Cannot write {path}: {e}")
    logger.debug(f"Wrote {path}")
    return path


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise ExportError(f"Cannot write {path}: {e}")
    logger.debug(f"Wrote {path}")
    return path


def sidecar_path(artifact: Path) -> Path:
    artifact = Path(artifact)
    return artifact.with_name(artifact.name + ".meta.json")


def write_sidecar(
    artifact: Path,
    scenario_sha256: str,
    tolerances: Dict[str, float],
    timings_ms: Dict[str, float],
    summary: Optional[Dict[str, Any]] = None,
) -> Path:
    """Metadata {tool_version, scenario_sha256, tolerances, timings_ms[, summary]}."""
    payload: Dict[str, Any] = {
        "tool_version": TOOL_VERSION,
        "scenario_sha256": scenario_sha256,
        "tolerances": tolerances,
        "timings_ms": {k: round(v, 3) for k, v in timings_ms.items()},
    }
    if summary:
        payload["summary"] = summary
    return write_json(sidecar_path(artifact), payload)
