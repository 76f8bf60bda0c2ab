"""Scenario files: everything one command needs to run a session.

A scenario selects the task shape, the simulated patient (including the
elastic-band impairment stage), the scripted therapist and the session
configuration.  Files are JSON against a published schema, version 1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from .core import AanError, SessionConfig, TimedTrajectory, config_from_dict
from .policy import ScriptedTherapist, Task
from .simdyn import ElasticBand, PatientModel

TRIANGLE_VERTICES = ((0.40, -0.15), (0.55, 0.15), (0.25, 0.15))
RECTANGLE_VERTICES = ((0.25, -0.15), (0.55, -0.15), (0.55, 0.15), (0.25, 0.15))


class ScenarioError(AanError):
    """The scenario file is malformed or internally inconsistent."""


@dataclass(frozen=True)
class Scenario:
    name: str
    cfg: SessionConfig
    task: Task
    patient: PatientModel
    therapist: ScriptedTherapist | None


def _schema() -> dict:
    text = resources.files("aanrehab").joinpath("scenario.schema.json") \
        .read_text(encoding="utf-8")
    return json.loads(text)


def polygon_path(vertices, start_fraction: float, duration: float,
                 dt: float) -> tuple[TimedTrajectory, dict[int, float]]:
    """Constant-speed traversal of a closed polygon.

    Returns the sampled path and, per vertex index, the passage time.  The
    traversal starts at start_fraction of the total perimeter.
    """
    verts = np.asarray(vertices, dtype=float)
    loop = np.vstack([verts, verts[:1]])
    seg = np.linalg.norm(np.diff(loop, axis=0), axis=1)
    if np.any(seg <= 0):
        raise ScenarioError("polygon has a zero-length edge")
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(cum[-1])
    s0 = (start_fraction % 1.0) * total

    steps = int(round(duration / dt))
    times = np.arange(steps + 1) * dt
    arcs = (s0 + total * times / duration) % total
    arcs[-1] = arcs[0]  # closed loop: end where it started
    idx = np.clip(np.searchsorted(cum, arcs, side="right") - 1, 0,
                  len(seg) - 1)
    frac = (arcs - cum[idx]) / seg[idx]
    points = loop[idx] + frac[:, None] * (loop[idx + 1] - loop[idx])

    passage = {}
    for v in range(len(verts)):
        rel = (cum[v] - s0) % total
        passage[v] = rel / total * duration
    return TimedTrajectory(times, points), passage


def _edge_midpoint_time(vertices, edge_start: int, s0_fraction: float,
                        duration: float) -> float:
    verts = np.asarray(vertices, dtype=float)
    loop = np.vstack([verts, verts[:1]])
    seg = np.linalg.norm(np.diff(loop, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(cum[-1])
    s0 = (s0_fraction % 1.0) * total
    arc = cum[edge_start] + 0.5 * seg[edge_start]
    return float(((arc - s0) % total) / total * duration)


def build_task(shape: str, duration: float, dt: float) -> Task:
    """The two shipped tasks: a triangle traced from the mid-lower edge and
    a rectangle traced from the mid-bottom edge, both counter-clockwise.

    Keypoints are the corner passages plus one checkpoint at the midpoint
    of the top edge, where the impairment pulls hardest.
    """
    if shape == "triangle":
        verts = TRIANGLE_VERTICES
        start_edge = 2   # start mid-way along the C->A closing edge
        check_edge = 1   # checkpoint on the top edge B->C
    elif shape == "rectangle":
        verts = RECTANGLE_VERTICES
        start_edge = 0   # start mid-way along the bottom edge
        check_edge = 2   # checkpoint on the top edge
    else:
        raise ScenarioError(f"unknown task shape {shape!r}")
    loop = np.vstack([np.asarray(verts), np.asarray(verts)[:1]])
    seg = np.linalg.norm(np.diff(loop, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    start_fraction = float((cum[start_edge] + 0.5 * seg[start_edge]) / cum[-1])
    desired, passage = polygon_path(verts, start_fraction, duration, dt)
    keypoints = list(passage.values())
    keypoints.append(_edge_midpoint_time(verts, check_edge, start_fraction,
                                         duration))
    keypoints = sorted(t for t in keypoints if 0.0 < t < duration)
    return Task(shape, desired, tuple(keypoints))


def build_scenario(obj: dict) -> Scenario:
    """Validate a scenario document and construct the runnable pieces."""
    try:
        jsonschema.validate(obj, _schema())
    except jsonschema.ValidationError as exc:
        raise ScenarioError(f"scenario schema violation: {exc.message}") from exc

    try:
        cfg = config_from_dict(obj.get("config", {}))
    except AanError as exc:
        raise ScenarioError(str(exc)) from exc

    task = build_task(obj["task"]["shape"], cfg.duration, cfg.dt_sim)

    pat = obj["patient"]
    band = None
    if "band" in pat:
        band = ElasticBand(np.asarray(pat["band"]["anchor"], dtype=float),
                           float(pat["band"]["stiffness"]),
                           float(pat["band"].get("rest_length", 0.0)))
    try:
        patient = PatientModel(float(pat["mass"]),
                               np.asarray(pat["stiffness"], dtype=float),
                               np.asarray(pat["damping"], dtype=float),
                               task.desired, band,
                               float(pat.get("learning_rate", 0.0)),
                               float(pat.get("correction_limit", 0.0)))
    except AanError as exc:
        raise ScenarioError(str(exc)) from exc
    if patient.stiffness.size != cfg.dim:
        raise ScenarioError("patient gain dimension does not match the config")

    therapist = None
    if "therapist" in obj:
        th = obj["therapist"]
        therapist = ScriptedTherapist(
            float(th.get("deviation_threshold", 0.01)),
            float(th.get("pulse_force", 15.0)),
            float(th.get("pulse_duration", 0.1)))
        if therapist.pulse_force <= cfg.force_threshold:
            raise ScenarioError("therapist pulse force must exceed the "
                                "via-point force threshold")
    return Scenario(obj["name"], cfg, task, patient, therapist)


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    return build_scenario(obj)


def shipped_scenario_path(name: str):
    """Path of a scenario bundled with the package (e.g. task1-stage1)."""
    return resources.files("aanrehab").joinpath("scenarios",
                                                f"{name}.json")
