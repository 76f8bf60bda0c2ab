"""Outcome metrics: corrective effort (M1) and movement smoothness (M2).

M1 summarizes the patient-side robot force over an episode.  M2 is the
negated spectral arc length of the speed profile: smoother motion has a
shorter arc, so values closer to zero mean smoother movement.
"""
from __future__ import annotations

import math

import numpy as np

from .core import AanError, TimedTrajectory, ValidationError, central_differences

SPARC_MAX_FREQ_HZ = 10.0
SPARC_AMP_THRESHOLD = 0.05
SPARC_MIN_SAMPLES = 16


class UndefinedMetricError(AanError):
    """The metric is not defined for this input (e.g. an all-zero speed)."""


def corrective_force_metric(control_forces: np.ndarray,
                            statistic: str = "mean") -> float:
    """Episode-level M1: a statistic of the control force norm per step."""
    f = np.asarray(control_forces, dtype=float)
    if f.ndim != 2 or f.shape[0] == 0:
        raise ValidationError("control forces must be a non-empty (S, d) array")
    norms = np.linalg.norm(f, axis=1)
    if statistic == "mean":
        return float(np.mean(norms))
    if statistic == "rms":
        return float(np.sqrt(np.mean(norms * norms)))
    if statistic == "peak":
        return float(np.max(norms))
    raise ValidationError(f"unknown force statistic {statistic!r}")


def speed_profile(actual: TimedTrajectory) -> np.ndarray:
    """Speed as the norm of central-difference velocities of the positions."""
    vel = central_differences(actual.positions, actual.dt)
    return np.linalg.norm(vel, axis=1)


def sparc(speed: np.ndarray, dt: float,
          max_freq_hz: float = SPARC_MAX_FREQ_HZ,
          amp_threshold: float = SPARC_AMP_THRESHOLD) -> float:
    """Negated spectral arc length of a speed profile.

    The magnitude spectrum (zero-padded to the next power of two at least
    4x the length) is normalized by its zero-frequency value; the arc is
    measured up to an adaptive cutoff, the last frequency not below
    max_freq_hz at which the normalized spectrum still reaches
    amp_threshold, with the frequency axis normalized by that cutoff.
    """
    v = np.asarray(speed, dtype=float)
    if v.ndim != 1:
        raise ValidationError("speed must be a 1-D profile")
    if v.size < SPARC_MIN_SAMPLES:
        raise UndefinedMetricError(
            f"need at least {SPARC_MIN_SAMPLES} samples, got {v.size}")
    if dt <= 0 or not math.isfinite(dt):
        raise ValidationError("dt must be positive")
    if not np.all(np.isfinite(v)):
        raise ValidationError("non-finite sample in speed profile")
    if np.max(np.abs(v)) == 0.0:
        raise UndefinedMetricError("all-zero speed profile")

    nfft = 1 << int(math.ceil(math.log2(4 * v.size)))
    spectrum = np.abs(np.fft.rfft(v, nfft))
    freqs = np.fft.rfftfreq(nfft, d=dt)
    mag = spectrum / spectrum[0]

    in_band = freqs <= max_freq_hz + 1e-12
    f_sel = freqs[in_band]
    m_sel = mag[in_band]
    above = np.flatnonzero(m_sel >= amp_threshold)
    cut = int(above[-1])
    if cut == 0:
        return 0.0
    f_cut = f_sel[: cut + 1] / f_sel[cut]
    m_cut = m_sel[: cut + 1]
    arc = np.sqrt(np.diff(f_cut) ** 2 + np.diff(m_cut) ** 2)
    return -float(np.sum(arc))


def smoothness_metric(actual: TimedTrajectory) -> float:
    """Episode-level M2: spectral arc length of the actual speed profile."""
    return sparc(speed_profile(actual), actual.dt)


def track_rms(actual: TimedTrajectory, desired: TimedTrajectory) -> float:
    """RMS distance between the actual motion and the desired motion."""
    ref = desired.position_at(actual.times)
    err = np.linalg.norm(actual.positions - ref, axis=1)
    return float(np.sqrt(np.mean(err * err)))


def keypoint_rms(actual: TimedTrajectory, desired: TimedTrajectory,
                 keypoint_times) -> float:
    """RMS distance from the desired motion at the task keypoint times."""
    kt = np.asarray(keypoint_times, dtype=float)
    if kt.size == 0:
        raise ValidationError("no keypoint times given")
    err = np.linalg.norm(actual.position_at(kt) - desired.position_at(kt),
                         axis=1)
    return float(np.sqrt(np.mean(err * err)))
