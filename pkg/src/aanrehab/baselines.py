"""Comparison controllers: error-scaled variable impedance and direct force.

Both run the same bootstrap-plus-iterations protocol as the adaptive
policy and emit schema-identical session records, so every downstream tool
(metrics, plots, the console) reads them unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (ConfigurationError, SessionConfig, TimedTrajectory,
                   ValidationError, central_differences, resample)
from .logio import episode_summary, header_record, iteration_record
from .policy import ScriptedTherapist, Task, scripted_therapist_events
from .simdyn import (EpisodeLog, PatientModel, RobotImpedance,
                     SimulationDiverged, _sampled, _step_count, adapt_patient,
                     run_episode)


@dataclass(frozen=True)
class VicParams:
    """Error-scaled stiffness law K = Kmin + (Kmax - Kmin) min(1, |e|/e_ref)."""

    k_min: tuple[float, ...] = (50.0, 50.0)
    k_max: tuple[float, ...] = (800.0, 800.0)
    error_ref: float = 0.05
    zeta: float = 0.7

    def __post_init__(self) -> None:
        if any(lo <= 0 for lo in self.k_min) or self.error_ref <= 0 \
                or self.zeta <= 0:
            raise ValidationError("VIC parameters must be positive")
        if any(hi < lo for lo, hi in zip(self.k_min, self.k_max)):
            raise ValidationError("k_max must dominate k_min")


def run_vic_episode(cfg: SessionConfig, patient: PatientModel,
                    reference: TimedTrajectory,
                    params: VicParams = VicParams()) -> EpisodeLog:
    """One episode under the variable-impedance law, fixed reference.

    Stiffness scales elementwise with the tracking error norm; damping
    follows critically-scaled 2 zeta sqrt(K m).
    """
    dt = cfg.dt_sim
    steps = _step_count(cfg.duration, dt)
    times = np.arange(steps + 1) * dt
    ref_x, ref_v = _sampled(reference, times)
    pref_x, pref_v = _sampled(patient.preferred, times)
    k_min = np.asarray(params.k_min, dtype=float)
    k_max = np.asarray(params.k_max, dtype=float)
    band = patient.band
    kh, dh = patient.stiffness, patient.damping
    inv_m = 1.0 / patient.mass

    xs = np.empty((steps + 1, k_min.size))
    vs = np.empty_like(xs)
    fc = np.empty_like(xs)
    fe = np.empty_like(xs)
    x = ref_x[0].copy()
    v = np.zeros(k_min.size)
    for k in range(steps + 1):
        err = ref_x[k] - x
        scale = min(1.0, float(np.linalg.norm(err)) / params.error_ref)
        k_t = k_min + (k_max - k_min) * scale
        d_t = 2.0 * params.zeta * np.sqrt(k_t * patient.mass)
        f_ctrl = k_t * err + d_t * (ref_v[k] - v)
        f_ext = kh * (pref_x[k] - x) + dh * (pref_v[k] - v)
        if band is not None:
            f_ext = f_ext - band.pull(x)
        xs[k] = x
        vs[k] = v
        fc[k] = f_ctrl
        fe[k] = f_ext
        if k == steps:
            break
        v = v + (dt * inv_m) * (f_ctrl + f_ext)
        x = x + dt * v
    if not np.all(np.isfinite(xs)):
        bad = int(np.argmax(~np.all(np.isfinite(xs), axis=1)))
        raise SimulationDiverged(bad, bad * dt)
    return EpisodeLog(TimedTrajectory(times, xs, vs), fc, fe, reference)


def _fixed_reference(cfg: SessionConfig, task: Task) -> TimedTrajectory:
    grid = cfg.grid_times
    base = resample(task.desired, cfg.waypoints, cfg.duration)
    return TimedTrajectory(grid, base.positions,
                           central_differences(base.positions,
                                               float(grid[1] - grid[0])))


def run_vic_session(cfg: SessionConfig, task: Task, patient: PatientModel,
                    params: VicParams = VicParams(),
                    scenario_name: str | None = None) -> list[dict]:
    """Bootstrap plus iterations under VIC; the reference never adapts."""
    reference = _fixed_reference(cfg, task)
    records = [header_record(cfg, task, "vic", scenario_name)]
    for iteration in range(cfg.iterations + 1):
        if iteration > 0:
            display = resample(episodes[-1].actual, cfg.waypoints,
                               cfg.duration)
            patient = adapt_patient(patient, task.desired, display,
                                    cfg.waypoints, cfg.duration)
        episodes = [run_vic_episode(cfg, patient, reference, params)
                    for _ in range(cfg.episodes_per_iteration)]
        summaries = [episode_summary(log, task.desired, task.keypoint_times,
                                     cfg.waypoints, cfg.force_statistic)
                     for log in episodes]
        records.append(iteration_record(iteration, summaries, reference))
    return records


def run_direct_session(cfg: SessionConfig, task: Task, patient: PatientModel,
                       therapist: ScriptedTherapist = ScriptedTherapist(),
                       scenario_name: str | None = None) -> list[dict]:
    """Zero-impedance robot; therapist pulses act on the patient directly."""
    if therapist.pulse_force <= cfg.force_threshold:
        raise ConfigurationError(
            "therapist pulses would never cross the force threshold")
    reference = _fixed_reference(cfg, task)
    robot = RobotImpedance.zero(cfg.dim)
    records = [header_record(cfg, task, "direct", scenario_name)]
    last: EpisodeLog | None = None
    for iteration in range(cfg.iterations + 1):
        events = []
        if iteration > 0 and last is not None:
            display = resample(last.actual, cfg.waypoints, cfg.duration)
            patient = adapt_patient(patient, task.desired, display,
                                    cfg.waypoints, cfg.duration)
            events = scripted_therapist_events(therapist, task, display, cfg)
        episodes = [run_episode(cfg, robot, patient, reference, events)
                    for _ in range(cfg.episodes_per_iteration)]
        summaries = [episode_summary(log, task.desired, task.keypoint_times,
                                     cfg.waypoints, cfg.force_statistic)
                     for log in episodes]
        records.append(iteration_record(iteration, summaries, reference,
                                        events=events))
        last = episodes[-1]
    return records
