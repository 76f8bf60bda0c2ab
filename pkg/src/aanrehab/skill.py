"""Learning and replaying the therapist's correction skill.

Across iterations the session banks pairs (s_i, via-points): the flattened
preference-versus-desired gap and the passage targets the therapist asked
for.  A partial-least-squares regression compresses those pairs; applying
it turns a fresh preference gap into predicted via-points, substituting
the therapist in later sessions.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (AanError, ProbTrajectory, SessionConfig, TimedTrajectory,
                   ValidationError, ViaPoint, config_from_dict,
                   trajectory_from_dict)
from .policy import Task, TherapySession, run_session
from .simdyn import PatientModel
from .viapoint import _spd_floor

SLOT_MATCH_WINDOW = 0.5


class DegenerateInputError(AanError):
    """The regression inputs carry no usable variance."""


@dataclass(frozen=True)
class PlsModel:
    """Centered partial-least-squares regression y = (s - mx) B + my."""

    coefficients: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray
    latent_count: int
    slot_times: tuple[float, ...]
    weights: np.ndarray
    x_loadings: np.ndarray
    y_loadings: np.ndarray

    @property
    def n_features(self) -> int:
        return int(self.coefficients.shape[0])

    @property
    def n_targets(self) -> int:
        return int(self.coefficients.shape[1])


def pls_fit(x: np.ndarray, y: np.ndarray, latent_count: int = 5,
            slot_times: Sequence[float] = ()) -> PlsModel:
    """Column-centered NIPALS extraction with SVD-seeded weight vectors.

    Each round takes the dominant direction of X^T Y, scores the residual
    X against it, regresses both blocks on the score and deflates X.  The
    regression matrix is W (P^T W)^-1 Q^T.  Extraction stops early when the
    cross-covariance or the score norm vanishes.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValidationError("X and Y must be 2-D with matching row counts")
    if x.shape[0] < 2:
        raise ValidationError("need at least two observation rows")
    if latent_count < 1:
        raise ValidationError("latent_count must be at least 1")
    mean_x = x.mean(axis=0)
    mean_y = y.mean(axis=0)
    xr = x - mean_x
    yc = y - mean_y
    if float(np.max(np.abs(xr))) == 0.0:
        raise DegenerateInputError("X has zero variance in every column")

    n_comp = min(latent_count, x.shape[0] - 1, x.shape[1])
    w_list, p_list, q_list = [], [], []
    for _ in range(n_comp):
        cross = xr.T @ yc
        if float(np.linalg.norm(cross)) < 1e-14:
            break
        left, _, _ = np.linalg.svd(cross, full_matrices=False)
        w = left[:, 0]
        pivot = int(np.argmax(np.abs(w)))
        if w[pivot] < 0:
            w = -w
        t = xr @ w
        tt = float(t @ t)
        if tt < 1e-24:
            break
        p = xr.T @ t / tt
        q = yc.T @ t / tt
        xr = xr - np.outer(t, p)
        w_list.append(w)
        p_list.append(p)
        q_list.append(q)

    if not w_list:
        coef = np.zeros((x.shape[1], y.shape[1]))
        return PlsModel(coef, mean_x, mean_y, 0, tuple(slot_times),
                        np.zeros((x.shape[1], 0)), np.zeros((x.shape[1], 0)),
                        np.zeros((y.shape[1], 0)))
    w_mat = np.column_stack(w_list)
    p_mat = np.column_stack(p_list)
    q_mat = np.column_stack(q_list)
    coef = w_mat @ np.linalg.solve(p_mat.T @ w_mat, q_mat.T)
    return PlsModel(coef, mean_x, mean_y, len(w_list), tuple(slot_times),
                    w_mat, p_mat, q_mat)


def pls_predict(model: PlsModel, s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    single = s.ndim == 1
    rows = np.atleast_2d(s)
    if rows.shape[1] != model.n_features:
        raise ValidationError(
            f"expected {model.n_features} features, got {rows.shape[1]}")
    out = (rows - model.mean_x) @ model.coefficients + model.mean_y
    return out[0] if single else out


def slot_times_for(task: Task, cfg: SessionConfig) -> tuple[float, ...]:
    return tuple(t + cfg.via_time_shift for t in task.keypoint_times)


def _slot_targets(slot_times: Sequence[float], via_points: Sequence[dict],
                  reference: TimedTrajectory, dim: int) -> np.ndarray:
    """Via mean per slot when a correction landed nearby, else the executed
    reference at the slot time (meaning: nothing to change there)."""
    row = np.empty((len(slot_times), dim))
    for j, slot_t in enumerate(slot_times):
        best = None
        best_gap = SLOT_MATCH_WINDOW
        for via in via_points:
            gap = abs(float(via["t"]) - slot_t)
            if gap <= best_gap:
                best = via
                best_gap = gap
        if best is not None:
            row[j] = np.asarray(best["mean"], dtype=float)
        else:
            row[j] = reference.position_at(slot_t)
    return row


def dataset_from_records(record_lists: Sequence[Sequence[dict]]) \
        -> tuple[np.ndarray, np.ndarray, tuple[float, ...], SessionConfig]:
    """Stack (s_i, slot targets) rows from logged sessions of one task."""
    if not record_lists:
        raise ValidationError("no sessions given")
    header = record_lists[0][0]
    if header.get("type") != "header":
        raise ValidationError("session log does not start with a header")
    cfg = config_from_dict(header["config"])
    task_name = header["task"]["name"]
    slots = tuple(float(t) + cfg.via_time_shift
                  for t in header["task"]["keypoint_times"])
    xs, ys = [], []
    for records in record_lists:
        head = records[0]
        if head.get("type") != "header" or head["task"]["name"] != task_name:
            raise ValidationError("sessions mix different tasks")
        for rec in records:
            if rec.get("type") != "iteration" or rec["iteration"] == 0:
                continue
            if rec["therapist_state"] is None:
                continue
            reference = trajectory_from_dict(rec["reference"])
            xs.append(np.asarray(rec["therapist_state"], dtype=float))
            ys.append(_slot_targets(slots, rec["via_points"], reference,
                                    reference.dim).reshape(-1))
    if not xs:
        raise ValidationError("sessions contain no trained iterations")
    return np.vstack(xs), np.vstack(ys), slots, cfg


def build_dataset(sessions: Sequence[TherapySession]) -> tuple[np.ndarray,
                                                               np.ndarray,
                                                               tuple[float, ...]]:
    """Stack (s_i, slot targets) rows from finished sessions of one task."""
    if not sessions:
        raise ValidationError("no sessions given")
    x, y, slots, _ = dataset_from_records([s.records for s in sessions])
    return x, y, slots


def fit_skill(sessions: Sequence[TherapySession],
              latent_count: int | None = None) -> PlsModel:
    x, y, slots = build_dataset(sessions)
    count = latent_count if latent_count is not None \
        else sessions[0].cfg.latent_count
    return pls_fit(x, y, count, slots)


def fit_skill_records(record_lists: Sequence[Sequence[dict]],
                      latent_count: int | None = None) -> PlsModel:
    """Fit the regression straight from stored session logs."""
    x, y, slots, cfg = dataset_from_records(record_lists)
    count = latent_count if latent_count is not None else cfg.latent_count
    return pls_fit(x, y, count, slots)


def reproduce_skill(model: PlsModel, session: TherapySession,
                    preference: ProbTrajectory | None = None) -> list[ViaPoint]:
    """Predicted via-points for the session's current preference."""
    from .policy import build_therapist_state

    pref = preference if preference is not None else session.preference
    if pref is None:
        raise ValidationError("session has no encoded preference yet")
    state = build_therapist_state(pref, session.task, session.cfg)
    flat = pls_predict(model, state)
    dim = pref.dim
    means = flat.reshape(len(model.slot_times), dim)
    vias = []
    for slot_t, mean in zip(model.slot_times, means):
        cov = _spd_floor(pref.cov_at(slot_t))
        vias.append(ViaPoint(float(slot_t), mean, cov))
    return vias


def run_skill_session(cfg: SessionConfig, task: Task, patient: PatientModel,
                      model: PlsModel,
                      scenario_name: str | None = None) -> TherapySession:
    """A full session where the regression, not a therapist, supplies vias."""
    expected = slot_times_for(task, cfg)
    if tuple(round(t, 9) for t in expected) != \
            tuple(round(t, 9) for t in model.slot_times):
        raise ValidationError("model slot times do not match the task")

    def factory(session: TherapySession) -> Callable:
        return lambda pref: reproduce_skill(model, session, pref)

    return run_session(cfg, task, patient, therapist=None,
                       via_fn_factory=factory, scenario_name=scenario_name,
                       method="skill")


def model_to_dict(model: PlsModel) -> dict:
    return {
        "coefficients": model.coefficients.tolist(),
        "mean_x": model.mean_x.tolist(),
        "mean_y": model.mean_y.tolist(),
        "latent_count": model.latent_count,
        "slot_times": list(model.slot_times),
        "weights": model.weights.tolist(),
        "x_loadings": model.x_loadings.tolist(),
        "y_loadings": model.y_loadings.tolist(),
    }


def model_from_dict(obj: dict) -> PlsModel:
    return PlsModel(
        np.asarray(obj["coefficients"], dtype=float),
        np.asarray(obj["mean_x"], dtype=float),
        np.asarray(obj["mean_y"], dtype=float),
        int(obj["latent_count"]),
        tuple(float(t) for t in obj["slot_times"]),
        np.asarray(obj["weights"], dtype=float),
        np.asarray(obj["x_loadings"], dtype=float),
        np.asarray(obj["y_loadings"], dtype=float),
    )


def save_model(path, model: PlsModel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path) -> PlsModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
