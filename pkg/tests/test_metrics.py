"""Corrective-effort and smoothness metrics."""
from __future__ import annotations

import numpy as np
import pytest

from aanrehab.core import TimedTrajectory, ValidationError
from aanrehab.metrics import (UndefinedMetricError, corrective_force_metric,
                              keypoint_rms, smoothness_metric, sparc,
                              speed_profile, track_rms)


def bell_speed(duration=2.0, dt=0.01, amplitude=0.3):
    """Speed profile of a straight-line minimum-jerk reach."""
    t = np.arange(0.0, duration + dt / 2, dt)
    s = t / duration
    v = amplitude / duration * 30.0 * s**2 * (1.0 - s) ** 2
    return v, dt


def rippled_speed(ripple, freq_hz=6.0, duration=2.0, dt=0.01):
    v, _ = bell_speed(duration, dt)
    t = np.arange(v.size) * dt
    return v * (1.0 + ripple * np.sin(2.0 * np.pi * freq_hz * t)), dt


class TestSparc:
    def test_amplitude_invariance(self):
        v, dt = bell_speed()
        base = sparc(v, dt)
        assert sparc(1000.0 * v, dt) == pytest.approx(base, abs=1e-12)
        assert sparc(1e-3 * v, dt) == pytest.approx(base, abs=1e-12)

    def test_smooth_reach_beats_rippled_reach(self):
        v, dt = bell_speed()
        w, _ = rippled_speed(0.15)
        assert sparc(v, dt) > sparc(w, dt)

    def test_monotone_under_growing_ripple(self):
        # Amplitudes chosen so every step registers above the 0.05
        # normalized-spectrum threshold (tiny ripples are ignored by design).
        values = [sparc(*rippled_speed(a, freq_hz=5.0))
                  for a in (0.15, 0.2, 0.3, 0.5)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_tiny_ripple_below_threshold_is_ignored(self):
        v, dt = bell_speed()
        w, _ = rippled_speed(0.02, freq_hz=5.0)
        assert sparc(w, dt) == pytest.approx(sparc(v, dt), abs=1e-6)

    def test_time_scaling_near_invariance(self):
        fast, dt = bell_speed(duration=2.0)
        slow, _ = bell_speed(duration=4.0)
        assert abs(sparc(fast, dt) - sparc(slow, dt)) < 0.05

    def test_value_is_negative_arc_length(self):
        v, dt = bell_speed()
        assert sparc(v, dt) < 0.0

    def test_deterministic(self):
        v, dt = rippled_speed(0.1)
        assert sparc(v, dt) == sparc(v, dt)

    def test_all_zero_speed_undefined(self):
        with pytest.raises(UndefinedMetricError):
            sparc(np.zeros(100), 0.01)

    def test_too_few_samples_undefined(self):
        with pytest.raises(UndefinedMetricError):
            sparc(np.ones(15), 0.01)

    def test_input_validation(self):
        v, dt = bell_speed()
        with pytest.raises(ValidationError):
            sparc(v.reshape(-1, 1), dt)
        with pytest.raises(ValidationError):
            sparc(v, 0.0)
        bad = v.copy()
        bad[3] = np.nan
        with pytest.raises(ValidationError):
            sparc(bad, dt)


class TestCorrectiveForce:
    def test_statistics_hand_computed(self):
        f = np.array([[3.0, 4.0], [0.0, 0.0]])  # norms 5, 0
        assert corrective_force_metric(f, "mean") == pytest.approx(2.5)
        assert corrective_force_metric(f, "rms") == pytest.approx(
            np.sqrt(12.5))
        assert corrective_force_metric(f, "peak") == pytest.approx(5.0)

    def test_unknown_statistic_rejected(self):
        with pytest.raises(ValidationError):
            corrective_force_metric(np.ones((4, 2)), "median")

    def test_empty_input_rejected(self):
        with pytest.raises(ValidationError):
            corrective_force_metric(np.zeros((0, 2)))
        with pytest.raises(ValidationError):
            corrective_force_metric(np.zeros(5))

    def test_zero_forces_give_zero_effort(self):
        assert corrective_force_metric(np.zeros((10, 2))) == 0.0

    def test_non_negative_and_time_reversal_invariant(self):
        rng = np.random.default_rng(0)
        f = rng.normal(size=(50, 2))
        for stat in ("mean", "rms", "peak"):
            val = corrective_force_metric(f, stat)
            assert val >= 0.0
            assert corrective_force_metric(f[::-1], stat) == val


class TestTrajectoryMetrics:
    def test_speed_profile_of_uniform_motion(self):
        t = np.linspace(0.0, 1.0, 51)
        pos = np.column_stack([0.3 * t, 0.4 * t])  # speed 0.5 everywhere
        traj = TimedTrajectory(t, pos)
        np.testing.assert_allclose(speed_profile(traj), 0.5, atol=1e-12)

    def test_smoothness_metric_wraps_sparc(self):
        t = np.linspace(0.0, 2.0, 101)
        pos = np.column_stack([np.sin(t), np.cos(t)])
        traj = TimedTrajectory(t, pos)
        assert smoothness_metric(traj) == sparc(speed_profile(traj), traj.dt)

    def test_track_rms_hand_computed(self):
        t = np.linspace(0.0, 1.0, 11)
        desired = TimedTrajectory(t, np.zeros((11, 2)))
        actual = TimedTrajectory(t, np.full((11, 2), [0.03, 0.04]))
        assert track_rms(actual, desired) == pytest.approx(0.05)

    def test_keypoint_rms_hand_computed(self):
        t = np.linspace(0.0, 1.0, 101)
        desired = TimedTrajectory(t, np.zeros((101, 2)))
        # error grows linearly: 0.1*t in x only
        actual = TimedTrajectory(t, np.column_stack([0.1 * t, np.zeros(101)]))
        got = keypoint_rms(actual, desired, [0.0, 1.0])
        assert got == pytest.approx(np.sqrt((0.0 + 0.01) / 2.0))

    def test_keypoint_rms_requires_keypoints(self):
        t = np.linspace(0.0, 1.0, 11)
        traj = TimedTrajectory(t, np.zeros((11, 2)))
        with pytest.raises(ValidationError):
            keypoint_rms(traj, traj, [])
