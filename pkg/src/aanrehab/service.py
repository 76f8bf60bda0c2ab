"""HTTP session service: one live therapy session driven over JSON.

The browser console (or any client) reads consolidated state, posts force
events, and advances the therapy loop one iteration at a time.  A single
writer lock serializes advances; reads serve an immutable snapshot, so a
client never observes a half-updated iteration.
"""
from __future__ import annotations

import json
import threading
from typing import Iterator

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from .core import (ConfigurationError, ForceEvent, prob_trajectory_to_dict,
                   resample, trajectory_to_dict)
from .logio import metrics_rows
from .policy import bootstrap_session, run_iteration
from .scenario import Scenario

REPLAY_MAX_SAMPLES = 500
SSE_KEEPALIVE_SECONDS = 15.0


class ServiceState:
    """Owns the live session, its pending events and the change counter."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.advance_lock = threading.Lock()
        self.state_lock = threading.RLock()
        self.changed = threading.Condition()
        self.version = 0
        self.pending: list[ForceEvent] = []
        self.session = None
        self.snapshot: dict = {}
        self.reset()

    def _bump(self) -> None:
        with self.changed:
            self.version += 1
            self.changed.notify_all()

    def _rebuild_snapshot(self) -> None:
        session = self.session
        cfg = session.cfg
        task = session.task
        display = min(cfg.waypoints, REPLAY_MAX_SAMPLES)
        actuals = [trajectory_to_dict(resample(log.actual, display,
                                               cfg.duration))
                   for log in session.episodes]
        vias = []
        for rec in session.records:
            if rec.get("type") != "iteration":
                continue
            for via in rec.get("via_points", []):
                vias.append({**via, "iteration": rec["iteration"]})
        self.snapshot = {
            "scenario": self.scenario.name,
            "iteration": session.iteration,
            "iterations_planned": cfg.iterations,
            "duration": cfg.duration,
            "force_threshold": cfg.force_threshold,
            "waypoints": cfg.waypoints,
            "task": {
                "name": task.name,
                "keypoint_times": list(task.keypoint_times),
                "desired": trajectory_to_dict(
                    resample(task.desired, cfg.waypoints, cfg.duration)),
            },
            "reference": trajectory_to_dict(session.reference),
            "preference": (prob_trajectory_to_dict(session.preference)
                           if session.preference is not None else None),
            "via_points": vias,
            "actuals": actuals,
            "metrics": metrics_rows(session.records),
        }

    def reset(self) -> None:
        with self.state_lock:
            sc = self.scenario
            self.session = bootstrap_session(sc.cfg, sc.task, sc.patient,
                                             scenario_name=sc.name)
            self.pending = []
            self._rebuild_snapshot()
        self._bump()

    def add_force(self, event: ForceEvent) -> int:
        with self.state_lock:
            self.pending.append(event)
            return len(self.pending)

    def advance(self) -> dict:
        events = sorted(self.pending, key=lambda ev: ev.time)
        new_session = run_iteration(self.session, events)
        with self.state_lock:
            self.session = new_session
            self.pending = []
            self._rebuild_snapshot()
        self._bump()
        return {"iteration": new_session.iteration, "version": self.version}


def _error(status: int, kind: str, message: str) -> JSONResponse:
    return JSONResponse({"error": {"kind": kind, "message": message}},
                        status_code=status)


def create_app(scenario: Scenario) -> FastAPI:
    if scenario.cfg.dim != 2:
        raise ConfigurationError("the session service drives planar "
                                 "scenarios (fx, fy) only")
    state = ServiceState(scenario)
    app = FastAPI(title="aanrehab session service")
    app.state.service = state
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"^https?://(localhost|127\.0\.0\.1)(:\d+)?$",
        allow_origins=["null"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/state")
    def get_state() -> Response:
        with state.state_lock:
            payload = dict(state.snapshot)
            payload["version"] = state.version
            payload["pending_events"] = len(state.pending)
        return JSONResponse(payload)

    @app.get("/replay")
    def get_replay(episode: int = 0) -> Response:
        with state.state_lock:
            episodes = state.session.episodes
            if episode < 0 or episode >= len(episodes):
                return _error(400, "bad_request",
                              f"episode must be in [0, {len(episodes) - 1}]")
            cfg = state.session.cfg
            display = min(cfg.waypoints, REPLAY_MAX_SAMPLES)
            traj = resample(episodes[episode].actual, display, cfg.duration)
        return JSONResponse({"episode": episode,
                             "actual": trajectory_to_dict(traj)})

    @app.post("/force")
    async def post_force(request: Request) -> Response:
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError:
            return _error(400, "bad_request", "body is not valid JSON")
        if not isinstance(body, dict) \
                or any(key not in body for key in ("t", "fx", "fy")):
            return _error(400, "bad_request",
                          "expected {\"t\": s, \"fx\": N, \"fy\": N}")
        t, fx, fy = body["t"], body["fx"], body["fy"]
        if any(isinstance(v, bool) or not isinstance(v, (int, float))
               for v in (t, fx, fy)):
            return _error(400, "bad_request", "malformed force event")
        if not np.all(np.isfinite([t, fx, fy])):
            return _error(400, "bad_request", "non-finite force event")
        if t < 0.0 or t > state.scenario.cfg.duration:
            return _error(422, "out_of_range",
                          f"event time {t:g} outside [0, "
                          f"{state.scenario.cfg.duration:g}]")
        event = ForceEvent(float(t), np.array([float(fx), float(fy)]))
        pending = state.add_force(event)
        return JSONResponse({
            "pending": pending,
            "magnitude": event.magnitude,
            "clears_threshold":
                event.magnitude > state.scenario.cfg.force_threshold,
        })

    @app.post("/advance")
    def post_advance() -> Response:
        if not state.advance_lock.acquire(blocking=False):
            return _error(409, "busy", "an advance is already running")
        try:
            return JSONResponse(state.advance())
        finally:
            state.advance_lock.release()

    @app.post("/reset")
    def post_reset() -> Response:
        if not state.advance_lock.acquire(blocking=False):
            return _error(409, "busy", "an advance is already running")
        try:
            state.reset()
        finally:
            state.advance_lock.release()
        return JSONResponse({"version": state.version,
                             "iteration": state.session.iteration})

    @app.get("/events")
    def get_events() -> StreamingResponse:
        def stream() -> Iterator[str]:
            last = -1
            while True:
                with state.changed:
                    if state.version == last:
                        state.changed.wait(timeout=SSE_KEEPALIVE_SECONDS)
                    current = state.version
                if current != last:
                    last = current
                    yield f"data: {{\"version\": {current}}}\n\n"
                else:
                    yield ": keepalive\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app
