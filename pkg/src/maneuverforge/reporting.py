"""CSV and text-table rendering for run artifacts.

Every file write goes through a temp-file-and-rename so a crash never
leaves a partial artifact behind. Wall-clock timing appears only in the
per-iteration CSV (the ``wall_ms`` column); all other outputs are
byte-reproducible across identical runs.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .orchestrator import BatchReport, IterationRecord, RunResult
from .simulate import Trajectory

TRAJECTORY_COLUMNS = ("time_s", "x_m", "y_m", "heading_rad", "v_long_mps",
                      "v_lat_mps", "yaw_rate_radps", "throttle", "steering",
                      "brake", "reverse")

ITERATION_COLUMNS = ("trial", "k", "implemented", "angle_error_deg",
                     "signed_error_deg", "collision", "mean_jerk", "cost",
                     "wall_ms")

VELOCITY_COLUMNS = ("time_s", "vx_mean", "vx_ci", "vy_mean", "vy_ci",
                    "vrot_mean_degps", "vrot_ci")

LEARNING_COLUMNS = ("batch", "trials", "mean_angle_error_deg",
                    "min_angle_error_deg", "implemented", "rejected",
                    "success_rate_pct")


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trajectory_csv(traj: Trajectory) -> str:
    lines = [",".join(TRAJECTORY_COLUMNS)]
    for sample in traj.samples:
        s, u = sample.state, sample.control
        lines.append(",".join(str(v) for v in (
            sample.time, s.x_pos, s.y_pos, s.heading, s.v_long, s.v_lat,
            s.yaw_rate, u.throttle, u.steering, u.brake, int(u.reverse))))
    return "\n".join(lines) + "\n"


def iteration_csv(trial_records: list[tuple[int, IterationRecord]]) -> str:
    lines = [",".join(ITERATION_COLUMNS)]
    for trial, record in trial_records:
        m = record.metrics
        lines.append(",".join(str(v) for v in (
            trial,
            record.k,
            int(record.implemented),
            m.angle_error if m else "",
            m.signed_heading_error if m else "",
            int(m.collision) if m else "",
            m.mean_jerk if m else "",
            record.cost if record.cost is not None else "",
            f"{record.wall_ms:.3f}",
        )))
    return "\n".join(lines) + "\n"


def run_iteration_rows(result: RunResult) -> list[tuple[int, IterationRecord]]:
    return [(0, record) for record in result.records]


def batch_iteration_rows(report: BatchReport) -> list[tuple[int, IterationRecord]]:
    rows = []
    for trial, records in enumerate(report.records):
        rows.extend((trial, record) for record in records)
    return rows


def velocity_ci_csv(rows: list[dict]) -> str:
    lines = [",".join(VELOCITY_COLUMNS)]
    for row in rows:
        lines.append(",".join(str(row[c]) for c in VELOCITY_COLUMNS))
    return "\n".join(lines) + "\n"


def learning_progress_csv(report: BatchReport) -> str:
    lines = [",".join(LEARNING_COLUMNS)]
    for batch in report.batches:
        lines.append(",".join(str(v) for v in (
            batch.index,
            batch.trials,
            batch.mean_angle_error if batch.mean_angle_error is not None else "",
            batch.min_angle_error if batch.min_angle_error is not None else "",
            batch.implemented,
            batch.rejected,
            batch.success_rate,
        )))
    return "\n".join(lines) + "\n"


def parameter_execution_table(report: BatchReport) -> str:
    """Implemented/rejected accounting, one row overall plus one per batch."""
    header = (f"{'Batch':<12}{'Total':>8}{'Implemented':>14}"
              f"{'Rejected':>10}{'Success (%)':>13}")
    lines = [header, "-" * len(header)]
    lines.append(f"{'Overall':<12}{report.total:>8}{report.implemented:>14}"
                 f"{report.rejected:>10}{report.implemented_pct:>12.1f}%")
    for batch in report.batches:
        pct = 100.0 * batch.implemented / batch.trials if batch.trials else 0.0
        lines.append(f"{f'Batch {batch.index}':<12}{batch.trials:>8}"
                     f"{batch.implemented:>14}{batch.rejected:>10}"
                     f"{pct:>12.1f}%")
    return "\n".join(lines) + "\n"


def result_json(result: RunResult) -> str:
    return json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n"


def batch_json(report: BatchReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
