"""Point-mass impedance simulation of the patient/replay robot pair.

The patient-side robot renders a spring-damper toward a reference
trajectory while the simulated patient pulls toward their own preferred
path, degraded by an elastic band tethered to an anchor.  Integration is
semi-implicit Euler at a fixed control rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import (AanError, ForceEvent, TimedTrajectory, ValidationError,
                   central_differences, resample)


class SimulationDiverged(AanError):
    """The integrator produced a non-finite state."""

    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite state at step {step} (t={t:.6f} s)")
        self.step = step
        self.t = t


@dataclass(frozen=True)
class RobotImpedance:
    """Diagonal Cartesian stiffness/damping of one robot."""

    stiffness: np.ndarray
    damping: np.ndarray
    zero_mode: bool = False

    def __post_init__(self) -> None:
        k = np.atleast_1d(np.asarray(self.stiffness, dtype=float))
        d = np.atleast_1d(np.asarray(self.damping, dtype=float))
        if k.ndim == 2:
            if np.any(k != np.diag(np.diag(k))):
                raise ValidationError("stiffness matrix must be diagonal")
            k = np.diag(k)
        if d.ndim == 2:
            if np.any(d != np.diag(np.diag(d))):
                raise ValidationError("damping matrix must be diagonal")
            d = np.diag(d)
        if k.shape != d.shape:
            raise ValidationError("stiffness and damping dimensions differ")
        if np.any(k < 0) or np.any(d < 0):
            raise ValidationError("impedance gains must be non-negative")
        if not self.zero_mode and np.any(k <= 0):
            raise ValidationError("stiffness entries must be positive "
                                  "(set zero_mode for a transparent robot)")
        kk = k.copy(); kk.flags.writeable = False
        dd = d.copy(); dd.flags.writeable = False
        object.__setattr__(self, "stiffness", kk)
        object.__setattr__(self, "damping", dd)

    @property
    def dim(self) -> int:
        return int(self.stiffness.size)

    @classmethod
    def zero(cls, dim: int) -> "RobotImpedance":
        return cls(np.zeros(dim), np.zeros(dim), zero_mode=True)


@dataclass(frozen=True)
class ElasticBand:
    """Tether pulling the hand toward an anchor once stretched past rest length."""

    anchor: np.ndarray
    stiffness: float
    rest_length: float = 0.0

    def __post_init__(self) -> None:
        a = np.asarray(self.anchor, dtype=float)
        if a.ndim != 1 or not np.all(np.isfinite(a)):
            raise ValidationError("band anchor must be a finite vector")
        if self.stiffness < 0 or self.rest_length < 0:
            raise ValidationError("band stiffness and rest length must be >= 0")
        aa = a.copy(); aa.flags.writeable = False
        object.__setattr__(self, "anchor", aa)
        object.__setattr__(self, "stiffness", float(self.stiffness))
        object.__setattr__(self, "rest_length", float(self.rest_length))

    def pull(self, x: np.ndarray) -> np.ndarray:
        """Outward stretch force k*max(0, |x-a|-L0)*(x-a)/|x-a|; zero at the anchor."""
        r = x - self.anchor
        dist = float(np.linalg.norm(r))
        stretch = dist - self.rest_length
        if dist == 0.0 or stretch <= 0.0:
            return np.zeros_like(r)
        return (self.stiffness * stretch / dist) * r


@dataclass(frozen=True)
class PatientModel:
    """Simulated impaired subject: servo toward a preferred path plus a band.

    When ``learning_rate`` and ``correction_limit`` are both positive the
    subject also adapts between iterations: after seeing how far the last
    replayed motion missed the displayed shape, they shift their intended
    path a fraction of that error toward compensation, but can only hold an
    intent at most ``correction_limit`` metres away from the displayed shape
    at any instant.  The residual beyond that capacity is the part of the
    impairment the subject cannot overcome alone.
    """

    mass: float
    stiffness: np.ndarray
    damping: np.ndarray
    preferred: TimedTrajectory
    band: ElasticBand | None = None
    learning_rate: float = 0.0
    correction_limit: float = 0.0

    def __post_init__(self) -> None:
        if self.mass <= 0 or not math.isfinite(self.mass):
            raise ValidationError("patient mass must be positive")
        k = np.asarray(self.stiffness, dtype=float)
        d = np.asarray(self.damping, dtype=float)
        if k.shape != d.shape or k.ndim != 1:
            raise ValidationError("patient gains must be matching vectors")
        if np.any(k < 0) or np.any(d < 0):
            raise ValidationError("patient gains must be non-negative")
        if not 0.0 <= self.learning_rate <= 1.0:
            raise ValidationError("learning rate must lie in [0, 1]")
        if self.correction_limit < 0:
            raise ValidationError("correction limit must be non-negative")
        kk = k.copy(); kk.flags.writeable = False
        dd = d.copy(); dd.flags.writeable = False
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "stiffness", kk)
        object.__setattr__(self, "damping", dd)
        object.__setattr__(self, "learning_rate", float(self.learning_rate))
        object.__setattr__(self, "correction_limit",
                           float(self.correction_limit))


def impedance_force(imp: RobotImpedance, x_ref: np.ndarray, v_ref: np.ndarray,
                    x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rendered force K (x_r - x) + D (v_r - v)."""
    return imp.stiffness * (x_ref - x) + imp.damping * (v_ref - v)


def patient_force(patient: PatientModel, t: float, x: np.ndarray,
                  v: np.ndarray) -> np.ndarray:
    """Subject effort toward the preferred path minus the band stretch pull."""
    xp = patient.preferred.position_at(t)
    vp = patient.preferred.velocity_at(t)
    f = patient.stiffness * (xp - x) + patient.damping * (vp - v)
    if patient.band is not None:
        f = f - patient.band.pull(x)
    return f


def adapt_patient(patient: PatientModel, desired: TimedTrajectory,
                  actual: TimedTrajectory, waypoints: int,
                  duration: float) -> PatientModel:
    """Trial-by-trial intent adjustment from the last replayed motion.

    The subject nudges their intended path by ``learning_rate`` times the
    gap between the displayed shape and what they actually produced, then
    the intent is clamped to within ``correction_limit`` metres of the
    displayed shape at every waypoint.  A zero rate or zero capacity leaves
    the patient unchanged.
    """
    if patient.learning_rate <= 0.0 or patient.correction_limit <= 0.0:
        return patient
    shape = resample(desired, waypoints, duration)
    intent = resample(patient.preferred, waypoints, duration)
    produced = resample(actual, waypoints, duration)
    updated = intent.positions + patient.learning_rate * (
        shape.positions - produced.positions)
    bias = updated - shape.positions
    norms = np.linalg.norm(bias, axis=1)
    over = norms > patient.correction_limit
    if np.any(over):
        bias[over] *= (patient.correction_limit / norms[over])[:, None]
    positions = shape.positions + bias
    dt = float(shape.times[1] - shape.times[0])
    preferred = TimedTrajectory(shape.times, positions,
                                central_differences(positions, dt))
    return replace(patient, preferred=preferred)


@dataclass(frozen=True)
class EpisodeLog:
    """Step-level record of one episode at the simulation rate."""

    actual: TimedTrajectory
    control_forces: np.ndarray
    external_forces: np.ndarray
    reference: TimedTrajectory

    def __post_init__(self) -> None:
        n = self.actual.times.size
        if self.control_forces.shape[0] != n or self.external_forces.shape[0] != n:
            raise ValidationError("force logs must match the state log length")


def _step_count(duration: float, dt: float) -> int:
    steps = int(round(duration / dt))
    if steps < 1 or abs(steps * dt - duration) > 1e-9 * max(1.0, steps):
        raise ValidationError(f"dt {dt:g} does not divide duration {duration:g}")
    return steps


def rasterize_events(events: Sequence[ForceEvent], steps: int, dt: float,
                     dim: int) -> np.ndarray:
    """Sum force events onto the simulation grid, nearest-step assignment."""
    out = np.zeros((steps + 1, dim))
    for ev in events:
        idx = int(round(ev.time / dt))
        if idx > steps:
            raise ValidationError(
                f"force event at t={ev.time:g} lies past the episode end")
        out[max(idx, 0)] += ev.force
    return out


def _sampled(traj: TimedTrajectory, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    traj = traj.with_velocities()
    return traj.position_at(times), traj.velocity_at(times)


def _first_bad_step(xs: np.ndarray, upto: int) -> int:
    bad = ~np.all(np.isfinite(xs[: upto + 1]), axis=1)
    return int(np.argmax(bad))


def run_episode(cfg, imp: RobotImpedance, patient: PatientModel,
                reference: TimedTrajectory,
                events: Sequence[ForceEvent] = ()) -> EpisodeLog:
    """Integrate one episode and log state and both force channels per step.

    The hand starts at the reference start with zero velocity.  Forces are
    logged before each state update, so the logged control force equals
    impedance_force applied to the logged state exactly.
    """
    dt = cfg.dt_sim
    steps = _step_count(cfg.duration, dt)
    times = np.arange(steps + 1) * dt
    ref_x, ref_v = _sampled(reference, times)
    pref_x, pref_v = _sampled(patient.preferred, times)
    injected = rasterize_events(events, steps, dt, imp.dim) if events else None

    band = patient.band
    kh, dh = patient.stiffness, patient.damping
    kr, dr = imp.stiffness, imp.damping
    inv_m = 1.0 / patient.mass

    xs = np.empty((steps + 1, imp.dim))
    vs = np.empty_like(xs)
    fc = np.empty_like(xs)
    fe = np.empty_like(xs)
    x = ref_x[0].copy()
    v = np.zeros(imp.dim)
    # Overflow on a diverging run is reported via SimulationDiverged below,
    # so the intermediate numpy warnings carry no extra information.
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps + 1):
            f_ctrl = kr * (ref_x[k] - x) + dr * (ref_v[k] - v)
            f_ext = kh * (pref_x[k] - x) + dh * (pref_v[k] - v)
            if band is not None:
                f_ext = f_ext - band.pull(x)
            if injected is not None:
                f_ext = f_ext + injected[k]
            xs[k] = x
            vs[k] = v
            fc[k] = f_ctrl
            fe[k] = f_ext
            if k == steps:
                break
            v = v + (dt * inv_m) * (f_ctrl + f_ext)
            x = x + dt * v
            if k % 200 == 199 and not np.all(np.isfinite(x)):
                bad = _first_bad_step(xs, k)
                raise SimulationDiverged(bad, bad * dt)
    if not np.all(np.isfinite(xs)):
        bad = _first_bad_step(xs, steps)
        raise SimulationDiverged(bad, bad * dt)
    actual = TimedTrajectory(times, xs, vs)
    return EpisodeLog(actual, fc, fe, reference)


def replay_with_forces(actual: TimedTrajectory, events: Sequence[ForceEvent],
                       imp: RobotImpedance, dt: float = 1e-3,
                       mass: float = 1.0) -> TimedTrajectory:
    """Replay-side robot tracking a recorded path while forces are injected.

    A unit-mass end effector under the replay impedance follows `actual`;
    injected events deform the replayed motion exactly as a hand pressing
    on the running robot would.
    """
    if actual.duration <= 0:
        raise ValidationError("cannot replay an empty-duration trajectory")
    steps = _step_count(actual.duration, dt)
    times = np.arange(steps + 1) * dt
    ref_x, ref_v = _sampled(actual, times)
    injected = rasterize_events(events, steps, dt, actual.dim)
    kr, dr = imp.stiffness, imp.damping

    xs = np.empty((steps + 1, actual.dim))
    vs = np.empty_like(xs)
    x = ref_x[0].copy()
    v = np.zeros(actual.dim)
    for k in range(steps + 1):
        xs[k] = x
        vs[k] = v
        if k == steps:
            break
        f = kr * (ref_x[k] - x) + dr * (ref_v[k] - v) + injected[k]
        v = v + (dt / mass) * f
        x = x + dt * v
    if not np.all(np.isfinite(xs)):
        bad = _first_bad_step(xs, steps)
        raise SimulationDiverged(bad, bad * dt)
    return TimedTrajectory(times, xs, vs)
