"""Turning therapist force streams into via-points.

A via-point is born where the corrective force norm stays above the
threshold: the segment start, shifted slightly forward, anchors a new
passage target computed from the gap between the desired motion and the
encoded preference, directed along the applied force.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (ForceEvent, OrderingError, ProbTrajectory, SessionConfig,
                   TimedTrajectory, ValidationError, ViaPoint)

logger = logging.getLogger(__name__)

COV_FLOOR = 1e-10


@dataclass(frozen=True)
class ForceSegment:
    """One above-threshold stretch of corrective force."""

    start: float
    end: float
    peak_force: np.ndarray
    peak_time: float

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise ValidationError("segment end precedes its start")
        f = np.asarray(self.peak_force, dtype=float)
        ff = f.copy(); ff.flags.writeable = False
        object.__setattr__(self, "peak_force", ff)


def detect_segments(events: Sequence[ForceEvent], threshold: float,
                    min_gap: float = 0.2) -> list[ForceSegment]:
    """Maximal runs with force norm above threshold, close runs merged.

    Events must arrive time sorted; runs separated by less than min_gap
    seconds are treated as one corrective intent.
    """
    last_t = -np.inf
    runs: list[list[ForceEvent]] = []
    current: list[ForceEvent] | None = None
    for ev in events:
        if ev.time < last_t:
            raise OrderingError(
                f"force events out of order at t={ev.time:g}")
        last_t = ev.time
        if ev.magnitude > threshold:
            if current is not None and ev.time - current[-1].time >= min_gap:
                current = None
            if current is None:
                current = []
                runs.append(current)
            current.append(ev)
        else:
            current = None

    merged: list[list[ForceEvent]] = []
    for run in runs:
        if merged and run[0].time - merged[-1][-1].time < min_gap:
            merged[-1].extend(run)
        else:
            merged.append(run)

    segments = []
    for run in merged:
        peak = max(run, key=lambda ev: ev.magnitude)
        segments.append(ForceSegment(run[0].time, run[-1].time,
                                     peak.force, peak.time))
    return segments


def _spd_floor(cov: np.ndarray, floor: float = COV_FLOOR) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    eigval, eigvec = np.linalg.eigh(cov)
    return (eigvec * np.maximum(eigval, floor)) @ eigvec.T


def derive_via_points(segments: Sequence[ForceSegment],
                      desired: TimedTrajectory,
                      reference: TimedTrajectory,
                      preference: ProbTrajectory,
                      cfg: SessionConfig) -> list[ViaPoint]:
    """One via-point per force segment.

    The mean moves off the current reference by the desired-versus-
    preference gap scaled along the unit force direction; the covariance is
    the preference covariance at the (shifted) via time.  Segments whose
    shifted time falls past the episode end are dropped with a warning.
    """
    vias: list[ViaPoint] = []
    for seg in segments:
        t_via = seg.start + cfg.via_time_shift
        if t_via > cfg.duration + 1e-12:
            logger.warning("dropping segment at %.3f s: shifted via time %.3f"
                           " exceeds duration %.3f", seg.start, t_via,
                           cfg.duration)
            continue
        norm = float(np.linalg.norm(seg.peak_force))
        if norm == 0.0:
            raise ValidationError("segment peak force has zero norm")
        unit = seg.peak_force / norm
        gap = desired.position_at(t_via) - preference.mean_at(t_via)
        if cfg.via_product == "hadamard":
            shift = cfg.deform_scale * gap * unit
        else:
            shift = cfg.deform_scale * float(gap @ unit) * unit
        mean = shift + reference.position_at(t_via)
        cov = _spd_floor(preference.cov_at(t_via))
        vias.append(ViaPoint(t_via, mean, cov))
    return vias


def boundary_via_points(desired: TimedTrajectory, duration: float,
                        cov_scale: float = 1e-6) -> list[ViaPoint]:
    """Tight via-points pinning both ends of the episode to the desired path."""
    dim = desired.dim
    eye = np.eye(dim)
    return [
        ViaPoint(0.0, desired.position_at(0.0), cov_scale * eye),
        ViaPoint(float(duration), desired.position_at(duration), cov_scale * eye),
    ]
