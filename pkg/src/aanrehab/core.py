"""Planar trajectory types, session configuration and canonical JSON codecs.

Everything downstream (simulation, encoding, deformation, logging) passes
these value types around.  They are frozen dataclasses carrying read-only
numpy arrays so that a trajectory handed to one stage cannot be mutated by
another.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

TIME_UNIFORMITY_TOL = 1e-9


class AanError(Exception):
    """Base class for all package errors."""


class ValidationError(AanError):
    """A value type was constructed with inconsistent contents."""


class ConfigurationError(AanError):
    """A configuration value is outside its allowed range."""


class OrderingError(AanError):
    """A time-ordered input was not sorted."""


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


def _interp_rows(t: float | np.ndarray, times: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Linear interpolation of an (N, d) array along its first axis."""
    t = np.asarray(t, dtype=float)
    cols = [np.interp(t, times, rows[:, k]) for k in range(rows.shape[1])]
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class TimedTrajectory:
    """Uniformly sampled positions over time, optionally with velocities.

    times start at 0 and are uniformly spaced; positions are (N, d) in
    meters.  Velocities are optional and derived, never integrated state.
    """

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray | None = None

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        pos = np.asarray(self.positions, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise ValidationError("times must be a non-empty 1-D array")
        if pos.ndim != 2 or pos.shape[0] != times.size:
            raise ValidationError("positions must be (N, d) matching times")
        if abs(times[0]) > TIME_UNIFORMITY_TOL:
            raise ValidationError(f"first time must be 0, got {times[0]!r}")
        if times.size > 1:
            steps = np.diff(times)
            if np.any(steps <= 0):
                raise OrderingError("times must be strictly increasing")
            if np.max(np.abs(steps - steps[0])) > TIME_UNIFORMITY_TOL:
                raise ValidationError("times must be uniformly spaced")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(pos))):
            raise ValidationError("non-finite entry in trajectory")
        object.__setattr__(self, "times", _readonly(times))
        object.__setattr__(self, "positions", _readonly(pos))
        if self.velocities is not None:
            vel = np.asarray(self.velocities, dtype=float)
            if vel.shape != pos.shape:
                raise ValidationError("velocities must match positions shape")
            if not np.all(np.isfinite(vel)):
                raise ValidationError("non-finite entry in velocities")
            object.__setattr__(self, "velocities", _readonly(vel))

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def dim(self) -> int:
        return int(self.positions.shape[1])

    def position_at(self, t: float | np.ndarray) -> np.ndarray:
        return _interp_rows(t, self.times, self.positions)

    def velocity_at(self, t: float | np.ndarray) -> np.ndarray:
        vel = self.velocities
        if vel is None:
            vel = central_differences(self.positions, self.dt)
        return _interp_rows(t, self.times, vel)

    def with_velocities(self) -> "TimedTrajectory":
        if self.velocities is not None:
            return self
        return TimedTrajectory(self.times, self.positions,
                               central_differences(self.positions, self.dt))


def central_differences(positions: np.ndarray, dt: float) -> np.ndarray:
    """Velocity estimate: central differences inside, one-sided at the ends."""
    pos = np.asarray(positions, dtype=float)
    if pos.shape[0] < 2 or dt <= 0:
        return np.zeros_like(pos)
    vel = np.empty_like(pos)
    vel[1:-1] = (pos[2:] - pos[:-2]) / (2.0 * dt)
    vel[0] = (pos[1] - pos[0]) / dt
    vel[-1] = (pos[-1] - pos[-2]) / dt
    return vel


@dataclass(frozen=True)
class ProbTrajectory:
    """A distribution over paths: mean and covariance per sample time."""

    times: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        means = np.asarray(self.means, dtype=float)
        covs = np.asarray(self.covariances, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise ValidationError("times must be a non-empty 1-D array")
        if np.any(np.diff(times) <= 0):
            raise OrderingError("times must be strictly increasing")
        d = means.shape[1] if means.ndim == 2 else -1
        if means.ndim != 2 or means.shape[0] != times.size:
            raise ValidationError("means must be (N, d) matching times")
        if covs.shape != (times.size, d, d):
            raise ValidationError("covariances must be (N, d, d)")
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(covs))):
            raise ValidationError("non-finite entry in probabilistic trajectory")
        sym = np.max(np.abs(covs - np.transpose(covs, (0, 2, 1))))
        if sym > 1e-9:
            raise ValidationError(f"covariances must be symmetric (max skew {sym:g})")
        eig = np.linalg.eigvalsh(covs)
        if np.min(eig) < -1e-10:
            raise ValidationError(f"covariance min eigenvalue {np.min(eig):g} below -1e-10")
        object.__setattr__(self, "times", _readonly(times))
        object.__setattr__(self, "means", _readonly(means))
        object.__setattr__(self, "covariances", _readonly(covs))

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    def mean_at(self, t: float | np.ndarray) -> np.ndarray:
        return _interp_rows(t, self.times, self.means)

    def cov_at(self, t: float) -> np.ndarray:
        """Covariance at t by linear interpolation (convex, stays PSD)."""
        times = self.times
        t = float(np.clip(t, times[0], times[-1]))
        j = int(np.searchsorted(times, t, side="right") - 1)
        j = min(max(j, 0), times.size - 2) if times.size > 1 else 0
        if times.size == 1 or t == times[j]:
            return np.array(self.covariances[j])
        w = (t - times[j]) / (times[j + 1] - times[j])
        return (1.0 - w) * self.covariances[j] + w * self.covariances[j + 1]

    def mean_trajectory(self) -> TimedTrajectory:
        return TimedTrajectory(self.times, self.means)


@dataclass(frozen=True)
class ViaPoint:
    """A desired passage point: time, mean position and SPD covariance."""

    time: float
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.ndim != 1:
            raise ValidationError("via mean must be a vector")
        d = mean.size
        if cov.shape != (d, d):
            raise ValidationError("via covariance must be (d, d)")
        if self.time < 0 or not math.isfinite(self.time):
            raise ValidationError("via time must be finite and non-negative")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValidationError("non-finite entry in via-point")
        if np.max(np.abs(cov - cov.T)) > 1e-9:
            raise ValidationError("via covariance must be symmetric")
        if np.min(np.linalg.eigvalsh(cov)) <= 0:
            raise ValidationError("via covariance must be positive definite")
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "mean", _readonly(mean))
        object.__setattr__(self, "covariance", _readonly(cov))


@dataclass(frozen=True)
class ForceEvent:
    """An external force sample applied at one instant."""

    time: float
    force: np.ndarray

    def __post_init__(self) -> None:
        f = np.asarray(self.force, dtype=float)
        if f.ndim != 1 or not np.all(np.isfinite(f)) or not math.isfinite(self.time):
            raise ValidationError("force event must carry a finite time and vector")
        if self.time < 0:
            raise ValidationError("force event time must be non-negative")
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "force", _readonly(f))

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.force))


@dataclass(frozen=True)
class SessionConfig:
    """All knobs of one therapy session.

    Defaults reproduce the reference desk-scale setup: 200 waypoints over a
    10 s episode, 10 mixture components, 10 therapy iterations of 5 episodes,
    a compliant patient-side robot and a stiff replay-side robot.
    """

    waypoints: int = 200
    mixture_components: int = 10
    iterations: int = 10
    episodes_per_iteration: int = 5
    duration: float = 10.0
    mean_reg: float = 1.0
    cov_reg: float = 60.0
    kernel_gamma: float = 2.0
    via_time_shift: float = 0.05
    deform_scale: float = 1.0
    force_threshold: float = 10.0
    robot_stiffness: tuple[float, ...] = (200.0, 200.0)
    robot_damping: tuple[float, ...] = (10.0, 10.0)
    replay_stiffness: tuple[float, ...] = (800.0, 800.0)
    replay_damping: tuple[float, ...] = (51.0, 51.0)
    seed: int = 0
    dt_sim: float = 1e-3
    min_gap: float = 0.2
    boundary_cov: float = 1e-6
    via_product: str = "hadamard"
    force_statistic: str = "mean"
    preference_history: int = 1
    latent_count: int = 5

    def __post_init__(self) -> None:
        pos_int = {"waypoints": 2, "mixture_components": 1, "iterations": 0,
                   "episodes_per_iteration": 1, "preference_history": 1,
                   "latent_count": 1}
        for name, low in pos_int.items():
            v = getattr(self, name)
            if not isinstance(v, int) or v < low:
                raise ConfigurationError(f"{name} must be an integer >= {low}, got {v!r}")
        pos_float = ["duration", "mean_reg", "cov_reg", "kernel_gamma",
                     "force_threshold", "dt_sim", "min_gap", "boundary_cov"]
        for name in pos_float:
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0:
                raise ConfigurationError(f"{name} must be a positive number, got {v!r}")
        if self.via_time_shift < 0:
            raise ConfigurationError("via_time_shift must be non-negative")
        if self.deform_scale < 0:
            raise ConfigurationError("deform_scale must be non-negative")
        if self.dt_sim > self.duration:
            raise ConfigurationError("dt_sim must not exceed duration")
        for name in ("robot_stiffness", "robot_damping",
                     "replay_stiffness", "replay_damping"):
            vals = tuple(float(v) for v in getattr(self, name))
            if any(v < 0 or not math.isfinite(v) for v in vals):
                raise ConfigurationError(f"{name} entries must be non-negative")
            object.__setattr__(self, name, vals)
        if len({len(self.robot_stiffness), len(self.robot_damping),
                len(self.replay_stiffness), len(self.replay_damping)}) != 1:
            raise ConfigurationError("robot gain vectors must share one dimension")
        if self.via_product not in ("hadamard", "scalar"):
            raise ConfigurationError("via_product must be 'hadamard' or 'scalar'")
        if self.force_statistic not in ("mean", "rms", "peak"):
            raise ConfigurationError("force_statistic must be mean, rms or peak")

    @property
    def dim(self) -> int:
        return len(self.robot_stiffness)

    @property
    def grid_times(self) -> np.ndarray:
        return np.linspace(0.0, self.duration, self.waypoints)

    def replaced(self, **kw) -> "SessionConfig":
        return replace(self, **kw)


def resample(traj: TimedTrajectory, n: int, duration: float) -> TimedTrajectory:
    """Linear resampling onto n uniform samples spanning [0, duration].

    Exact at shared sample times, so resampling an already-uniform
    trajectory onto its own grid is the identity.
    """
    if n < 2:
        raise ValidationError("resample needs n >= 2")
    if traj.duration + TIME_UNIFORMITY_TOL < duration:
        raise ValidationError(
            f"trajectory spans {traj.duration:g} s, cannot resample to {duration:g} s")
    grid = np.linspace(0.0, float(duration), n)
    return TimedTrajectory(grid, _interp_rows(grid, traj.times, traj.positions))


# ---------------------------------------------------------------------------
# Canonical JSON forms.  A trajectory is {"dt": step, "points": [[x, y], ...]};
# a probabilistic trajectory adds "covs" with each covariance flattened
# row-major.  Python float repr round-trips exactly, which keeps the logs
# byte-deterministic.

def trajectory_to_dict(traj: TimedTrajectory) -> dict:
    return {"dt": traj.dt, "points": traj.positions.tolist()}


def trajectory_from_dict(obj: dict) -> TimedTrajectory:
    points = np.asarray(obj["points"], dtype=float)
    times = np.arange(points.shape[0]) * float(obj["dt"])
    return TimedTrajectory(times, points)


def prob_trajectory_to_dict(prob: ProbTrajectory) -> dict:
    dts = np.diff(prob.times)
    if prob.times.size > 1 and np.max(np.abs(dts - dts[0])) > TIME_UNIFORMITY_TOL:
        raise ValidationError("canonical form requires a uniform time grid")
    dt = float(dts[0]) if prob.times.size > 1 else 0.0
    covs = [c.reshape(-1).tolist() for c in prob.covariances]
    return {"dt": dt, "points": prob.means.tolist(), "covs": covs}


def prob_trajectory_from_dict(obj: dict) -> ProbTrajectory:
    means = np.asarray(obj["points"], dtype=float)
    n, d = means.shape
    times = np.arange(n) * float(obj["dt"])
    covs = np.asarray(obj["covs"], dtype=float).reshape(n, d, d)
    return ProbTrajectory(times, means, covs)


def via_point_to_dict(via: ViaPoint) -> dict:
    return {"t": via.time, "mean": via.mean.tolist(),
            "cov": via.covariance.tolist()}


def via_point_from_dict(obj: dict) -> ViaPoint:
    return ViaPoint(float(obj["t"]), np.asarray(obj["mean"], dtype=float),
                    np.asarray(obj["cov"], dtype=float))


def force_event_to_dict(ev: ForceEvent) -> dict:
    return {"t": ev.time, "f": ev.force.tolist()}


def force_event_from_dict(obj: dict) -> ForceEvent:
    return ForceEvent(float(obj["t"]), np.asarray(obj["f"], dtype=float))


def config_to_dict(cfg: SessionConfig) -> dict:
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


def config_from_dict(obj: dict) -> SessionConfig:
    known = {f.name for f in fields(SessionConfig)}
    unknown = set(obj) - known
    if unknown:
        raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
    kw = {}
    for key, v in obj.items():
        kw[key] = tuple(v) if isinstance(v, list) else v
    return SessionConfig(**kw)


def dump_json_line(obj: dict) -> str:
    """One compact, key-order-preserving JSON line."""
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)
