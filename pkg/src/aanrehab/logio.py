"""Session log records and file writers.

One JSONL file per session: a header line with the configuration and task
snapshot, then one line per therapy iteration.  Every consumer (CLI
metrics/validate, the HTTP service, the browser console) reads this same
shape, and the offline and service paths share these writers so their
outputs can be compared byte for byte.
"""
from __future__ import annotations

import csv
import io
import json
from typing import Iterable, Sequence

import numpy as np

from .core import (ForceEvent, ProbTrajectory, SessionConfig, TimedTrajectory,
                   ValidationError, ViaPoint, config_to_dict, dump_json_line,
                   force_event_to_dict, prob_trajectory_to_dict, resample,
                   trajectory_to_dict, via_point_to_dict)
from .metrics import (corrective_force_metric, keypoint_rms, smoothness_metric,
                      track_rms)
from .simdyn import EpisodeLog


def episode_summary(log: EpisodeLog, desired: TimedTrajectory,
                    keypoint_times: Sequence[float], waypoints: int,
                    statistic: str = "mean") -> dict:
    """Scalar metrics plus display-resolution traces for one episode."""
    duration = log.actual.duration
    display = resample(log.actual, waypoints, duration)
    norms = np.linalg.norm(log.control_forces, axis=1)
    grid_idx = np.linspace(0, norms.size - 1, waypoints).round().astype(int)
    return {
        "m1": corrective_force_metric(log.control_forces, statistic),
        "m2": smoothness_metric(log.actual),
        "track_rms": track_rms(log.actual, desired),
        "keypoint_rms": keypoint_rms(log.actual, desired, keypoint_times),
        "actual": trajectory_to_dict(display),
        "control_norms": norms[grid_idx].tolist(),
    }


def iteration_record(iteration: int, episodes: Sequence[dict],
                     reference: TimedTrajectory,
                     preference: ProbTrajectory | None = None,
                     via_points: Sequence[ViaPoint] = (),
                     events: Sequence[ForceEvent] = (),
                     segments: Sequence = (),
                     dropped_segments: int = 0,
                     therapist_state: np.ndarray | None = None) -> dict:
    record = {
        "type": "iteration",
        "iteration": iteration,
        "preference": (prob_trajectory_to_dict(preference)
                       if preference is not None else None),
        "via_points": [via_point_to_dict(v) for v in via_points],
        "dropped_segments": dropped_segments,
        "segments": [
            {"start": s.start, "end": s.end, "peak": s.peak_force.tolist(),
             "peak_t": s.peak_time} for s in segments
        ],
        "events": [force_event_to_dict(e) for e in events],
        "therapist_state": (therapist_state.tolist()
                            if therapist_state is not None else None),
        "reference": trajectory_to_dict(reference),
        "episodes": list(episodes),
        "metrics": {
            "M1": float(np.mean([e["m1"] for e in episodes])),
            "M2": float(np.mean([e["m2"] for e in episodes])),
            "track_rms": float(np.mean([e["track_rms"] for e in episodes])),
            "keypoint_rms": float(np.mean([e["keypoint_rms"] for e in episodes])),
        },
    }
    return record


def header_record(cfg: SessionConfig, task, method: str,
                  scenario_name: str | None = None) -> dict:
    return {
        "type": "header",
        "method": method,
        "scenario": scenario_name,
        "config": config_to_dict(cfg),
        "task": {
            "name": task.name,
            "keypoint_times": list(task.keypoint_times),
            "keypoint_positions": task.desired.position_at(
                np.asarray(task.keypoint_times)).tolist(),
            "endpoints": [task.desired.positions[0].tolist(),
                          task.desired.positions[-1].tolist()],
        },
    }


def dump_session_jsonl(records: Iterable[dict]) -> str:
    return "".join(dump_json_line(r) + "\n" for r in records)


def write_session_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_session_jsonl(records))


def load_session_jsonl(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    if not records or records[0].get("type") != "header":
        raise ValidationError("session log must start with a header record")
    return records


def metrics_rows(records: Sequence[dict]) -> list[dict]:
    """Re-aggregate per-iteration metrics from the stored episode scalars."""
    rows = []
    for rec in records:
        if rec.get("type") != "iteration":
            continue
        eps = rec["episodes"]
        rows.append({
            "iteration": rec["iteration"],
            "M1": float(np.mean([e["m1"] for e in eps])),
            "M2": float(np.mean([e["m2"] for e in eps])),
            "track_rms": float(np.mean([e["track_rms"] for e in eps])),
        })
    return rows


def metrics_csv(rows: Sequence[dict], extra_field: str | None = None) -> str:
    fields = ["iteration", "M1", "M2", "track_rms"]
    if extra_field:
        fields = [extra_field] + fields
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(row[k]) if isinstance(row[k], float) else row[k]
                         for k in fields})
    return buf.getvalue()


def episode_jsonl(log: EpisodeLog) -> str:
    """Step-level export: one JSON line per simulation step."""
    traj = log.actual.with_velocities()
    lines = []
    for k in range(traj.times.size):
        lines.append(dump_json_line({
            "t": float(traj.times[k]),
            "x": traj.positions[k].tolist(),
            "v": traj.velocities[k].tolist(),
            "f_ctrl": log.control_forces[k].tolist(),
            "f_ext": log.external_forces[k].tolist(),
        }))
    return "\n".join(lines) + "\n"


def episode_csv(log: EpisodeLog) -> str:
    """Step-level export with header t,x,y,vx,vy,fcx,fcy,fex,fey."""
    traj = log.actual.with_velocities()
    if traj.dim != 2:
        raise ValidationError("CSV export is defined for planar logs")
    buf = io.StringIO()
    buf.write("t,x,y,vx,vy,fcx,fcy,fex,fey\n")
    for k in range(traj.times.size):
        row = [traj.times[k], traj.positions[k][0], traj.positions[k][1],
               traj.velocities[k][0], traj.velocities[k][1],
               log.control_forces[k][0], log.control_forces[k][1],
               log.external_forces[k][0], log.external_forces[k][1]]
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def plot_record(rec: dict) -> dict:
    """Per-iteration plot data: preference band, reference, actuals, vias,
    force traces."""
    pref = rec.get("preference")
    band = None
    if pref:
        covs = np.asarray(pref["covs"], dtype=float)
        d = int(round(covs.shape[1] ** 0.5))
        sig = np.sqrt(np.maximum(covs.reshape(-1, d, d), 0.0))
        band = [[2.0 * float(sig[i, k, k]) for k in range(d)]
                for i in range(sig.shape[0])]
    return {
        "iteration": rec["iteration"],
        "preference_mean": pref["points"] if pref else None,
        "preference_band2s": band,
        "reference": rec["reference"]["points"],
        "reference_dt": rec["reference"]["dt"],
        "actuals": [e["actual"]["points"] for e in rec["episodes"]],
        "via_points": rec["via_points"],
        "therapist_force": [[e["t"], *e["f"]] for e in rec["events"]],
        "control_norms": [e["control_norms"] for e in rec["episodes"]],
        "metrics": rec["metrics"],
    }
