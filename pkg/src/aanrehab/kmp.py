"""Kernelized trajectory model: fit a probabilistic reference, then predict
its mean and spread at arbitrary times, optionally pulled through via-points.

The model is the closed form of a kernel ridge problem on the reference
distribution: with Gram matrix H (squared-exponential kernel times the
identity per block) and Sigma the block diagonal of reference covariances,

    mean(t*) = h*(t*) (H + lam_mu Sigma)^-1 mu
    cov(t*)  = (N_U / lam_sig) (k(t*,t*) I - h*(t*) (H + lam_sig Sigma)^-1 h*(t*)^T)

Via-points enter by replacing the nearest reference entry when closer than
half a grid step, otherwise by extending the dataset.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .core import (AanError, ProbTrajectory, SessionConfig, TimedTrajectory,
                   ValidationError, ViaPoint, central_differences)

JITTER = 1e-8


class IllConditionedError(AanError):
    """A kernel system could not be factorized even with jitter."""


@dataclass(frozen=True)
class KmpModel:
    """Fitted kernel model holding its factorized systems."""

    times: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    mean_reg: float
    cov_reg: float
    kernel_gamma: float
    variance_count: int
    _mean_factor: tuple
    _cov_factor: tuple
    _alpha: np.ndarray

    @property
    def size(self) -> int:
        return int(self.times.size)

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])


def _kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    diff = a[:, None] - b[None, :]
    return np.exp(-gamma * diff * diff)


def _merge_vias(ref: ProbTrajectory, vias: Sequence[ViaPoint],
                duration: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    times = np.array(ref.times)
    means = np.array(ref.means)
    covs = np.array(ref.covariances)
    tol = duration / (2.0 * times.size)
    extra_t, extra_m, extra_c = [], [], []
    for via in vias:
        if via.time < -1e-12 or via.time > duration + 1e-12:
            raise ValidationError(
                f"via time {via.time:g} outside [0, {duration:g}]")
        if via.mean.size != means.shape[1]:
            raise ValidationError("via dimension does not match reference")
        nearest = int(np.argmin(np.abs(times - via.time)))
        if abs(times[nearest] - via.time) < tol:
            times[nearest] = via.time
            means[nearest] = via.mean
            covs[nearest] = via.covariance
        else:
            extra_t.append(via.time)
            extra_m.append(via.mean)
            extra_c.append(via.covariance)
    if extra_t:
        times = np.concatenate([times, np.asarray(extra_t)])
        means = np.vstack([means, np.asarray(extra_m)])
        covs = np.concatenate([covs, np.asarray(extra_c)])
    order = np.argsort(times, kind="stable")
    return times[order], means[order], covs[order]


def kmp_fit(ref: ProbTrajectory, vias: Sequence[ViaPoint] = (),
            mean_reg: float = 1.0, cov_reg: float = 60.0,
            kernel_gamma: float = 2.0,
            variance_count: int | None = None) -> KmpModel:
    """Assemble and factorize the kernel systems for a (possibly extended)
    reference distribution.

    variance_count overrides the spread prefactor; by default the extended
    dataset size N_U is used.
    """
    if mean_reg <= 0 or cov_reg <= 0 or kernel_gamma <= 0:
        raise ValidationError("regularizers and kernel width must be positive")
    duration = float(ref.times[-1])
    times, means, covs = _merge_vias(ref, vias, duration)
    n_u, dim = means.shape

    gram = _kernel(times, times, kernel_gamma)
    big_h = np.kron(gram, np.eye(dim))
    big_sigma = np.zeros_like(big_h)
    for i in range(n_u):
        block = covs[i] + JITTER * np.eye(dim)
        big_sigma[i * dim:(i + 1) * dim, i * dim:(i + 1) * dim] = block

    factors = []
    for reg in (mean_reg, cov_reg):
        system = big_h + reg * big_sigma
        try:
            factors.append(cho_factor(system, lower=True))
        except np.linalg.LinAlgError:
            cond = float(np.linalg.cond(system))
            raise IllConditionedError(
                f"kernel system not positive definite (cond ~ {cond:.3e})")
    alpha = cho_solve(factors[0], means.reshape(-1)).reshape(n_u, dim)

    return KmpModel(times, means, covs, float(mean_reg), float(cov_reg),
                    float(kernel_gamma),
                    int(variance_count) if variance_count else n_u,
                    factors[0], factors[1], alpha)


def kmp_predict(model: KmpModel, times: np.ndarray) -> ProbTrajectory:
    """Predicted mean and covariance of the fitted model at query times."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValidationError("query times must be a non-empty 1-D array")
    dim = model.dim
    kq = _kernel(times, model.times, model.kernel_gamma)
    mean = kq @ model._alpha

    rows = np.kron(kq, np.eye(dim))
    solved = cho_solve(model._cov_factor, rows.T)
    scale = model.variance_count / model.cov_reg
    covs = np.empty((times.size, dim, dim))
    for q in range(times.size):
        block = rows[q * dim:(q + 1) * dim]
        quad = block @ solved[:, q * dim:(q + 1) * dim]
        covs[q] = scale * (np.eye(dim) - quad)
    covs = 0.5 * (covs + np.transpose(covs, (0, 2, 1)))
    eigval, eigvec = np.linalg.eigh(covs)
    eigval = np.maximum(eigval, 0.0)
    covs = np.einsum("qde,qe,qfe->qdf", eigvec, eigval, eigvec)
    covs = 0.5 * (covs + np.transpose(covs, (0, 2, 1)))
    return ProbTrajectory(times, mean, covs)


def deform_reference(pref: ProbTrajectory, vias: Sequence[ViaPoint],
                     desired: TimedTrajectory,
                     cfg: SessionConfig) -> TimedTrajectory:
    """Next reference: the preference pulled through via-points and pinned to
    the desired endpoints; velocities by central differences."""
    from .viapoint import boundary_via_points

    all_vias = tuple(vias) + tuple(boundary_via_points(desired, cfg.duration,
                                                       cfg.boundary_cov))
    model = kmp_fit(pref, all_vias, cfg.mean_reg, cfg.cov_reg,
                    cfg.kernel_gamma)
    grid = cfg.grid_times
    pred = kmp_predict(model, grid)
    dt = grid[1] - grid[0]
    return TimedTrajectory(grid, pred.means,
                           central_differences(pred.means, dt))
