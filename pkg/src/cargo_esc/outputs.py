"""Run log, plot-data and summary files."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError
from .simulation import RunLog

FLOAT_FORMAT = "%.9g"

# Plot-data files, one per figure panel group.
PANELS: dict[str, tuple[str, ...]] = {
    "com_estimation": (
        "t_s", "roll", "pitch", "pos_x", "pos_y", "theta1", "theta2",
        "gamma_1", "gamma_2", "gamma_3", "v_1", "v_2", "v_3",
        "com_est_x", "com_est_y", "com_est_z", "com_true_x", "com_true_y", "com_true_z",
    ),
    "transport": (
        "t_s", "roll", "pitch", "pos_y", "pos_des_y", "theta1", "theta1_cmd", "theta2", "theta2_cmd",
        "servo_saturated", "transport",
    ),
}


@dataclass(frozen=True)
class OutputFlags:
    run_csv: bool = True
    plot_data: bool = True
    summary: bool = True


def _fmt(value: float) -> str:
    return FLOAT_FORMAT % value


def _write_table(path: Path, header: tuple[str, ...], rows: np.ndarray) -> None:
    try:
        with path.open("w", newline="", encoding="ascii") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def summarize(log: RunLog) -> dict[str, object]:
    """Flat key/value run summary."""
    data = log.array()
    col = {name: i for i, name in enumerate(log.columns)}
    roll = np.abs(data[:, col["roll"]])
    pitch = np.abs(data[:, col["pitch"]])
    pos = data[:, [col["pos_x"], col["pos_y"], col["pos_z"]]]
    pos_des = data[:, [col["pos_des_x"], col["pos_des_y"], col["pos_des_z"]]]
    err = np.linalg.norm(pos - pos_des, axis=1)
    final_com = data[-1, [col["com_est_x"], col["com_est_y"], col["com_est_z"]]]
    in_transport = data[:, col["transport"]] > 0.5

    out: dict[str, object] = {
        "scenario_id": log.scenario_id,
        "termination_cause": log.termination_cause,
        "termination_time": log.termination_time,
        "termination_detail": log.termination_detail or "none",
        "convergence_time": log.convergence_time,
        "samples": len(data),
        "max_abs_roll": float(roll.max()),
        "max_abs_pitch": float(pitch.max()),
        "servo_saturated_any": bool(np.any(data[:, col["servo_saturated"]] > 0.5)),
        "rms_position_error": float(math.sqrt(np.mean(err**2))),
        "final_com_est_x": float(final_com[0]),
        "final_com_est_y": float(final_com[1]),
        "final_com_est_z": float(final_com[2]),
        "com_true_x": float(log.com_true[0]),
        "com_true_y": float(log.com_true[1]),
        "com_true_z": float(log.com_true[2]),
    }
    if np.any(in_transport):
        y_err = data[in_transport, col["pos_y"]] - data[in_transport, col["pos_des_y"]]
        out["transport_start"] = log.transport_start
        out["max_abs_roll_transport"] = float(roll[in_transport].max())
        out["max_abs_pitch_transport"] = float(pitch[in_transport].max())
        out["rms_y_error_transport"] = float(math.sqrt(np.mean(y_err**2)))
    return out


def format_summary(summary: dict[str, object]) -> str:
    lines = []
    for key, value in summary.items():
        if value is None:
            text = "none"
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = _fmt(value)
        else:
            text = str(value)
        lines.append(f"{key}={text}")
    return "\n".join(lines) + "\n"


def emit_outputs(log: RunLog, out_dir: str | Path, flags: OutputFlags = OutputFlags()) -> list[Path]:
    """Write the run CSV, plot-data CSVs and summary into ``out_dir``.

    Returns the written paths. An empty log is rejected before anything is
    written.
    """
    if len(log) == 0:
        raise ConfigError("run log is empty; nothing to write (zero-duration run?)")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc

    data = log.array()
    written: list[Path] = []
    if flags.run_csv:
        path = out / "run.csv"
        _write_table(path, log.columns, data)
        written.append(path)
    if flags.plot_data:
        truth = np.tile(log.com_true, (len(data), 1))
        extended = np.hstack([data, truth])
        names = list(log.columns) + ["com_true_x", "com_true_y", "com_true_z"]
        for panel, cols in PANELS.items():
            idx = [names.index(c) for c in cols]
            path = out / f"plot_{panel}.csv"
            _write_table(path, cols, extended[:, idx])
            written.append(path)
    if flags.summary:
        path = out / "summary.txt"
        try:
            path.write_text(format_summary(summarize(log)), encoding="ascii")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
        written.append(path)
    return written
