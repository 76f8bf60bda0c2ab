"""Shared fixtures: fast session configs and cached expensive sessions."""
from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from aanrehab.core import ProbTrajectory, SessionConfig, TimedTrajectory
from aanrehab.policy import Task
from aanrehab.scenario import load_scenario, shipped_scenario_path


@pytest.fixture(scope="session")
def fast_cfg() -> SessionConfig:
    """Small but structurally faithful config for unit-level loop tests."""
    return SessionConfig(waypoints=60, mixture_components=4, iterations=2,
                         episodes_per_iteration=2, dt_sim=2e-3)


@pytest.fixture(scope="session")
def stage1() :
    return load_scenario(shipped_scenario_path("task1-stage1"))


@pytest.fixture(scope="session")
def stage2():
    return load_scenario(shipped_scenario_path("task1-stage2"))


@pytest.fixture(scope="session")
def fast_stage1(stage1):
    """Shipped task-1 stage-1 scenario trimmed for speed."""
    cfg = replace(stage1.cfg, iterations=3, episodes_per_iteration=2)
    return stage1, cfg


def make_prob_line(n: int = 40, duration: float = 10.0, dim: int = 2,
                   var: float = 1e-4) -> ProbTrajectory:
    """A straight-line probabilistic trajectory with uniform covariance."""
    times = np.linspace(0.0, duration, n)
    means = np.column_stack([np.linspace(0.0, 1.0, n),
                             np.linspace(-0.5, 0.5, n)])[:, :dim]
    covs = np.repeat(var * np.eye(dim)[None, :, :], n, axis=0)
    return ProbTrajectory(times, means, covs)


def make_sine_pref(n: int = 200, duration: float = 10.0,
                   var: float = 1e-4) -> ProbTrajectory:
    """A smooth planar arc used as a deformation substrate."""
    times = np.linspace(0.0, duration, n)
    means = np.column_stack([0.4 + 0.1 * np.sin(2 * np.pi * times / duration),
                             0.1 * np.cos(2 * np.pi * times / duration)])
    covs = np.repeat(var * np.eye(2)[None, :, :], n, axis=0)
    return ProbTrajectory(times, means, covs)


def make_line_task(duration: float = 10.0, n: int = 501) -> Task:
    times = np.linspace(0.0, duration, n)
    pos = np.column_stack([np.linspace(0.3, 0.5, n), np.zeros(n)])
    return Task("line", TimedTrajectory(times, pos), (duration / 2,))
