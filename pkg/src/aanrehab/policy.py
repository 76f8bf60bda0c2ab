"""The shape-adaptive therapy loop.

Each iteration: encode the motion preference from the previous episodes,
turn therapist force events into via-points against the current reference,
deform the preference into the next reference, run episodes with it, and
bank the (therapist state, via-points) pair for later skill learning.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .core import (ConfigurationError, ForceEvent, ProbTrajectory,
                   SessionConfig, TimedTrajectory, ValidationError, ViaPoint,
                   central_differences, resample)
from .gmmgmr import GmmModel, fit_gmm, gmr_condition
from .kmp import deform_reference
from .logio import episode_summary, header_record, iteration_record
from .simdyn import (EpisodeLog, PatientModel, RobotImpedance, adapt_patient,
                     run_episode)
from .viapoint import detect_segments, derive_via_points

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Task:
    """A desired motion with the instants of its key features."""

    name: str
    desired: TimedTrajectory
    keypoint_times: tuple[float, ...]

    def __post_init__(self) -> None:
        kp = tuple(float(t) for t in self.keypoint_times)
        if any(t <= 0 or t >= self.desired.duration for t in kp):
            raise ValidationError("keypoint times must lie inside the episode")
        if any(b <= a for a, b in zip(kp, kp[1:])):
            raise ValidationError("keypoint times must be strictly increasing")
        object.__setattr__(self, "keypoint_times", kp)


@dataclass(frozen=True)
class ScriptedTherapist:
    """Deterministic stand-in for a therapist watching the replay.

    At every keypoint whose replayed position misses the desired motion by
    more than the threshold, it pushes toward the desired point with a
    fixed-magnitude pulse centred on the keypoint instant.
    """

    deviation_threshold: float = 0.01
    pulse_force: float = 15.0
    pulse_duration: float = 0.1

    def __post_init__(self) -> None:
        if self.deviation_threshold <= 0 or self.pulse_force <= 0 \
                or self.pulse_duration <= 0:
            raise ValidationError("therapist parameters must be positive")


def scripted_therapist_events(therapist: ScriptedTherapist, task: Task,
                              actual: TimedTrajectory,
                              cfg: SessionConfig) -> list[ForceEvent]:
    """Pulse events at the simulation rate for every missed keypoint."""
    events: list[ForceEvent] = []
    dt = cfg.dt_sim
    for t_k in task.keypoint_times:
        gap = task.desired.position_at(t_k) - actual.position_at(t_k)
        dist = float(np.linalg.norm(gap))
        if dist <= therapist.deviation_threshold:
            continue
        force = (therapist.pulse_force / dist) * gap
        half = therapist.pulse_duration / 2.0
        k_first = int(np.ceil(max(0.0, t_k - half) / dt - 1e-9))
        k_last = int(np.floor(min(cfg.duration, t_k + half) / dt + 1e-9))
        for k in range(k_first, k_last + 1):
            events.append(ForceEvent(k * dt, force))
    return events


@dataclass(frozen=True)
class TherapySession:
    """Immutable snapshot of a session between iterations."""

    cfg: SessionConfig
    task: Task
    patient: PatientModel
    iteration: int
    reference: TimedTrajectory
    preference: ProbTrajectory | None
    episodes: tuple[EpisodeLog, ...]
    skill_rows: tuple[tuple[np.ndarray, tuple[ViaPoint, ...]], ...]
    records: tuple[dict, ...]

    @property
    def last_actual_display(self) -> TimedTrajectory:
        """The most recent episode as shown on the replay display."""
        log = self.episodes[-1]
        return resample(log.actual, self.cfg.waypoints, self.cfg.duration)


def _robot(cfg: SessionConfig) -> RobotImpedance:
    return RobotImpedance(np.asarray(cfg.robot_stiffness),
                          np.asarray(cfg.robot_damping))


def _iteration_seed(cfg: SessionConfig, iteration: int) -> int:
    seq = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(iteration,))
    return int(seq.generate_state(1)[0])


def encode_preference(session: TherapySession) -> tuple[ProbTrajectory, GmmModel]:
    """Fit the joint mixture on the recent episodes and condition on time."""
    cfg = session.cfg
    if not session.episodes:
        raise ValidationError("no episodes available to encode a preference")
    grid = cfg.grid_times
    rows = []
    for log in session.episodes:
        sample = resample(log.actual, cfg.waypoints, cfg.duration)
        rows.append(np.column_stack([sample.times, sample.positions]))
    data = np.vstack(rows)
    seed = _iteration_seed(cfg, session.iteration + 1)
    model = fit_gmm(data, cfg.mixture_components, seed)
    return gmr_condition(model, grid), model


def build_therapist_state(preference: ProbTrajectory, task: Task,
                          cfg: SessionConfig) -> np.ndarray:
    """Flattened preference-minus-desired gap, waypoint major."""
    desired = resample(task.desired, cfg.waypoints, cfg.duration)
    return (preference.means - desired.positions).reshape(-1)


def run_iteration(session: TherapySession, events: Sequence[ForceEvent],
                  via_fn: Callable[[ProbTrajectory], Sequence[ViaPoint]] | None
                  = None) -> TherapySession:
    """One therapy iteration; returns a new session, the input untouched.

    When via_fn is given (skill reproduction) it supplies the via-points
    and the raw events are not consulted.
    """
    cfg = session.cfg
    task = session.task
    preference, _ = encode_preference(session)

    segments = detect_segments(list(events), cfg.force_threshold, cfg.min_gap)
    if via_fn is not None:
        vias: Sequence[ViaPoint] = list(via_fn(preference))
        dropped = 0
    else:
        vias = derive_via_points(segments, task.desired, session.reference,
                                 preference, cfg)
        dropped = len([s for s in segments
                       if s.start + cfg.via_time_shift > cfg.duration + 1e-12])
    if len(vias) > cfg.waypoints // 10:
        raise ConfigurationError(
            f"{len(vias)} via-points exceed the waypoint budget "
            f"({cfg.waypoints // 10})")

    state = build_therapist_state(preference, task, cfg)
    new_ref = deform_reference(preference, vias, task.desired, cfg)
    patient = adapt_patient(session.patient, task.desired,
                            session.last_actual_display, cfg.waypoints,
                            cfg.duration)
    robot = _robot(cfg)
    episodes = tuple(run_episode(cfg, robot, patient, new_ref)
                     for _ in range(cfg.episodes_per_iteration))

    summaries = [episode_summary(log, task.desired, task.keypoint_times,
                                 cfg.waypoints, cfg.force_statistic)
                 for log in episodes]
    record = iteration_record(session.iteration + 1, summaries, new_ref,
                              preference, vias, events, segments, dropped,
                              state)
    keep = cfg.episodes_per_iteration * cfg.preference_history
    window = (session.episodes + episodes)[-keep:]
    return replace(session,
                   iteration=session.iteration + 1,
                   patient=patient,
                   reference=new_ref,
                   preference=preference,
                   episodes=window,
                   skill_rows=session.skill_rows + ((state, tuple(vias)),),
                   records=session.records + (record,))


def bootstrap_session(cfg: SessionConfig, task: Task, patient: PatientModel,
                      method: str = "proposed",
                      scenario_name: str | None = None) -> TherapySession:
    """Episodes with the raw desired motion as reference, before any encoding."""
    if abs(task.desired.duration - cfg.duration) > 1e-9:
        raise ConfigurationError("task duration does not match the config")
    if patient.stiffness.size != cfg.dim:
        raise ConfigurationError("patient dimension does not match the config")
    grid = cfg.grid_times
    base = resample(task.desired, cfg.waypoints, cfg.duration)
    ref0 = TimedTrajectory(grid, base.positions,
                           central_differences(base.positions,
                                               float(grid[1] - grid[0])))
    robot = _robot(cfg)
    episodes = tuple(run_episode(cfg, robot, patient, ref0)
                     for _ in range(cfg.episodes_per_iteration))
    summaries = [episode_summary(log, task.desired, task.keypoint_times,
                                 cfg.waypoints, cfg.force_statistic)
                 for log in episodes]
    header = header_record(cfg, task, method, scenario_name)
    record = iteration_record(0, summaries, ref0)
    return TherapySession(cfg, task, patient, 0, ref0, None, episodes, (),
                          (header, record))


def run_session(cfg: SessionConfig, task: Task, patient: PatientModel,
                therapist: ScriptedTherapist | None = None,
                via_fn_factory: Callable[[TherapySession],
                                         Callable[[ProbTrajectory],
                                                  Sequence[ViaPoint]]] | None
                = None,
                scenario_name: str | None = None,
                method: str = "proposed") -> TherapySession:
    """Bootstrap plus the configured number of therapy iterations.

    With a scripted therapist, each iteration's events come from replaying
    the previous iteration's last episode at display resolution.
    """
    if therapist is not None and therapist.pulse_force <= cfg.force_threshold:
        raise ConfigurationError(
            "therapist pulses would never cross the force threshold")
    session = bootstrap_session(cfg, task, patient, method, scenario_name)
    for _ in range(cfg.iterations):
        events: list[ForceEvent] = []
        if therapist is not None:
            events = scripted_therapist_events(
                therapist, task, session.last_actual_display, cfg)
        via_fn = via_fn_factory(session) if via_fn_factory is not None else None
        session = run_iteration(session, events, via_fn)
    return session


def session_keypoint_rms(session: TherapySession, iteration: int) -> float:
    """Keypoint RMS of an iteration, averaged over its episodes."""
    rec = session.records[iteration + 1]
    if rec["iteration"] != iteration:
        raise ValidationError(f"record mismatch for iteration {iteration}")
    return float(np.mean([e["keypoint_rms"] for e in rec["episodes"]]))
