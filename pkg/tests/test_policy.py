"""Therapy-loop orchestration: scripted therapist, iteration stepping,
session bookkeeping."""
from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from aanrehab.core import (ConfigurationError, ForceEvent, SessionConfig,
                           TimedTrajectory, ValidationError, ViaPoint,
                           dump_json_line, resample)
from aanrehab.policy import (ScriptedTherapist, Task, TherapySession,
                             bootstrap_session, encode_preference,
                             run_iteration, run_session,
                             scripted_therapist_events, session_keypoint_rms)
from aanrehab.simdyn import PatientModel

from conftest import make_line_task


def make_patient(point=(0.35, -0.03), duration=10.0, k=60.0, d=12.0, **kw):
    t = np.linspace(0.0, duration, 11)
    pos = np.tile(np.asarray(point, dtype=float), (11, 1))
    pref = TimedTrajectory(t, pos, np.zeros((11, 2)))
    return PatientModel(1.0, np.array([k, k]), np.array([d, d]), pref, **kw)


class TestTaskValidation:
    def test_keypoints_must_lie_inside_episode(self):
        t = np.linspace(0.0, 10.0, 101)
        traj = TimedTrajectory(t, np.zeros((101, 2)))
        with pytest.raises(ValidationError):
            Task("bad", traj, (0.0,))
        with pytest.raises(ValidationError):
            Task("bad", traj, (10.0,))

    def test_keypoints_must_increase(self):
        t = np.linspace(0.0, 10.0, 101)
        traj = TimedTrajectory(t, np.zeros((101, 2)))
        with pytest.raises(ValidationError):
            Task("bad", traj, (5.0, 5.0))

    def test_therapist_parameters_positive(self):
        with pytest.raises(ValidationError):
            ScriptedTherapist(deviation_threshold=0.0)
        with pytest.raises(ValidationError):
            ScriptedTherapist(pulse_force=-1.0)


class TestScriptedTherapist:
    def setup_method(self):
        self.cfg = SessionConfig(waypoints=60, dt_sim=2e-3)
        self.task = make_line_task()
        self.therapist = ScriptedTherapist(0.01, 15.0, 0.1)

    def test_on_track_replay_triggers_nothing(self):
        events = scripted_therapist_events(self.therapist, self.task,
                                           self.task.desired, self.cfg)
        assert events == []

    def test_missed_keypoint_pushes_toward_desired(self):
        # replay displaced 5 cm below the desired line everywhere
        off = TimedTrajectory(self.task.desired.times,
                              self.task.desired.positions
                              + np.array([0.0, -0.05]))
        events = scripted_therapist_events(self.therapist, self.task, off,
                                           self.cfg)
        assert events
        for ev in events:
            np.testing.assert_allclose(ev.force, [0.0, 15.0], atol=1e-9)

    def test_pulse_centred_on_keypoint_at_sim_rate(self):
        off = TimedTrajectory(self.task.desired.times,
                              self.task.desired.positions
                              + np.array([0.0, -0.05]))
        events = scripted_therapist_events(self.therapist, self.task, off,
                                           self.cfg)
        (t_k,) = self.task.keypoint_times
        times = np.array([ev.time for ev in events])
        assert float(times.min()) == pytest.approx(t_k - 0.05, abs=2e-3)
        assert float(times.max()) == pytest.approx(t_k + 0.05, abs=2e-3)
        np.testing.assert_allclose(np.diff(times), self.cfg.dt_sim,
                                   atol=1e-12)

    def test_deviation_at_threshold_is_tolerated(self):
        off = TimedTrajectory(self.task.desired.times,
                              self.task.desired.positions
                              + np.array([0.0, -0.01]))
        events = scripted_therapist_events(self.therapist, self.task, off,
                                           self.cfg)
        assert events == []


class TestBootstrap:
    def test_reference_is_resampled_desired(self, fast_cfg):
        task = make_line_task()
        session = bootstrap_session(fast_cfg, task, make_patient())
        want = resample(task.desired, fast_cfg.waypoints, fast_cfg.duration)
        np.testing.assert_array_equal(session.reference.positions,
                                      want.positions)
        assert session.iteration == 0
        assert session.preference is None
        assert len(session.episodes) == fast_cfg.episodes_per_iteration

    def test_header_and_first_record(self, fast_cfg):
        session = bootstrap_session(fast_cfg, make_line_task(),
                                    make_patient(), scenario_name="line-demo")
        header, rec0 = session.records
        assert header["type"] == "header"
        assert header["scenario"] == "line-demo"
        assert rec0["iteration"] == 0
        assert len(rec0["episodes"]) == fast_cfg.episodes_per_iteration

    def test_duration_mismatch_rejected(self, fast_cfg):
        task = make_line_task(duration=8.0)
        with pytest.raises(ConfigurationError):
            bootstrap_session(replace(fast_cfg, duration=10.0), task,
                              make_patient(duration=8.0))

    def test_patient_dimension_mismatch_rejected(self, fast_cfg):
        task = make_line_task()
        t = np.linspace(0.0, 10.0, 11)
        pref = TimedTrajectory(t, np.zeros((11, 3)), np.zeros((11, 3)))
        bad = PatientModel(1.0, np.zeros(3), np.zeros(3), pref)
        with pytest.raises(ConfigurationError):
            bootstrap_session(fast_cfg, task, bad)


def burst_events(t0, direction=(0.0, 1.0), n=6, dt=0.01, mag=15.0):
    d = np.asarray(direction, dtype=float)
    return [ForceEvent(t0 + i * dt, mag * d) for i in range(n)]


class TestRunIteration:
    def test_advances_without_mutating_input(self, fast_cfg):
        before = bootstrap_session(fast_cfg, make_line_task(), make_patient())
        n_records = len(before.records)
        after = run_iteration(before, burst_events(5.0))
        assert before.iteration == 0
        assert len(before.records) == n_records
        assert after.iteration == 1
        assert len(after.records) == n_records + 1
        assert len(after.skill_rows) == 1

    def test_reference_endpoints_pinned_to_task(self, fast_cfg):
        task = make_line_task()
        session = run_iteration(
            bootstrap_session(fast_cfg, task, make_patient()), [])
        np.testing.assert_allclose(session.reference.positions[0],
                                   task.desired.positions[0], atol=1e-3)
        np.testing.assert_allclose(session.reference.positions[-1],
                                   task.desired.positions[-1], atol=1e-3)

    def test_events_become_via_points_in_record(self, fast_cfg):
        session = bootstrap_session(fast_cfg, make_line_task(),
                                    make_patient())
        after = run_iteration(session, burst_events(5.0))
        rec = after.records[-1]
        assert rec["iteration"] == 1
        assert len(rec["via_points"]) == 1
        assert rec["via_points"][0]["t"] == pytest.approx(
            5.0 + fast_cfg.via_time_shift)

    def test_below_threshold_events_make_no_vias(self, fast_cfg):
        session = bootstrap_session(fast_cfg, make_line_task(),
                                    make_patient())
        events = burst_events(5.0, mag=9.0)
        after = run_iteration(session, events)
        assert after.records[-1]["via_points"] == []

    def test_via_budget_enforced(self, fast_cfg):
        session = bootstrap_session(fast_cfg, make_line_task(),
                                    make_patient())
        events = []
        for i in range(fast_cfg.waypoints // 10 + 1):
            events.extend(burst_events(0.5 + 1.2 * i))
        with pytest.raises(ConfigurationError):
            run_iteration(session, events)

    def test_via_fn_overrides_events(self, fast_cfg):
        session = bootstrap_session(fast_cfg, make_line_task(),
                                    make_patient())
        via = ViaPoint(5.0, np.array([0.42, 0.01]), 1e-6 * np.eye(2))
        after = run_iteration(session, [], via_fn=lambda pref: [via])
        rec = after.records[-1]
        assert len(rec["via_points"]) == 1
        assert rec["via_points"][0]["t"] == pytest.approx(5.0)

    def test_skill_row_banks_state_and_vias(self, fast_cfg):
        session = bootstrap_session(fast_cfg, make_line_task(),
                                    make_patient())
        after = run_iteration(session, burst_events(5.0))
        state, vias = after.skill_rows[0]
        assert state.shape == (fast_cfg.waypoints * fast_cfg.dim,)
        assert len(vias) == 1

    def test_episode_window_respects_history(self, fast_cfg):
        session = bootstrap_session(fast_cfg, make_line_task(),
                                    make_patient())
        for _ in range(3):
            session = run_iteration(session, [])
        keep = fast_cfg.episodes_per_iteration * fast_cfg.preference_history
        assert len(session.episodes) == keep

    def test_encode_preference_needs_episodes(self, fast_cfg):
        session = bootstrap_session(fast_cfg, make_line_task(),
                                    make_patient())
        hollow = replace(session, episodes=())
        with pytest.raises(ValidationError):
            encode_preference(hollow)


class TestRunSession:
    def test_runs_configured_iterations(self, fast_cfg):
        session = run_session(fast_cfg, make_line_task(), make_patient())
        assert session.iteration == fast_cfg.iterations
        assert len(session.records) == fast_cfg.iterations + 2

    def test_therapist_weaker_than_threshold_rejected(self, fast_cfg):
        weak = ScriptedTherapist(0.01, fast_cfg.force_threshold, 0.1)
        with pytest.raises(ConfigurationError):
            run_session(fast_cfg, make_line_task(), make_patient(), weak)

    def test_scripted_events_recorded_per_iteration(self, fast_cfg):
        patient = make_patient(point=(0.4, -0.06))
        therapist = ScriptedTherapist(0.01, 15.0, 0.1)
        session = run_session(fast_cfg, make_line_task(), patient, therapist)
        rec = session.records[2]
        assert rec["events"]

    def test_repeat_is_byte_identical(self, fast_cfg):
        task = make_line_task()
        therapist = ScriptedTherapist(0.01, 15.0, 0.1)
        a = run_session(fast_cfg, task, make_patient(point=(0.4, -0.06)),
                        therapist)
        b = run_session(fast_cfg, task, make_patient(point=(0.4, -0.06)),
                        therapist)
        lines_a = [dump_json_line(r) for r in a.records]
        lines_b = [dump_json_line(r) for r in b.records]
        assert lines_a == lines_b

    def test_keypoint_rms_reads_iteration_record(self, fast_cfg):
        session = run_session(fast_cfg, make_line_task(),
                              make_patient(point=(0.4, -0.06)))
        rec = session.records[2]
        want = float(np.mean([e["keypoint_rms"] for e in rec["episodes"]]))
        assert session_keypoint_rms(session, 1) == want
