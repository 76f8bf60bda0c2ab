"""Joint (time, position) Gaussian mixture fitting and time conditioning.

A mixture is fit over rows (t, x1..xd) with expectation-maximization, then
conditioned on time to obtain a probabilistic trajectory: the per-waypoint
mean and covariance used as the motion-preference model downstream.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .core import AanError, ProbTrajectory, ValidationError

logger = logging.getLogger(__name__)

COV_REG = 1e-6
WEIGHT_FLOOR = 1e-8
EM_MAX_ITER = 200
EM_REL_TOL = 1e-6


class InsufficientDataError(AanError):
    """Too few samples for the requested number of components."""


class DegenerateComponentError(AanError):
    """A component collapsed twice despite re-seeding."""


class ConditioningError(AanError):
    """Conditioning produced a non-finite result."""


@dataclass(frozen=True)
class GmmModel:
    """Fitted mixture over joint (t, x) rows plus its fit diagnostics."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    time_span: tuple[float, float]
    loglik_history: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        m = np.asarray(self.means, dtype=float)
        s = np.asarray(self.covariances, dtype=float)
        if w.ndim != 1 or m.ndim != 2 or m.shape[0] != w.size:
            raise ValidationError("inconsistent mixture shapes")
        if s.shape != (w.size, m.shape[1], m.shape[1]):
            raise ValidationError("inconsistent covariance shapes")
        if abs(float(w.sum()) - 1.0) > 1e-9 or np.any(w < 0):
            raise ValidationError("weights must be non-negative and sum to 1")
        for arr, name in ((w, "weights"), (m, "means"), (s, "covariances")):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"non-finite {name}")
            ro = arr.copy(); ro.flags.writeable = False
            object.__setattr__(self, name, ro)
        object.__setattr__(self, "time_span",
                           (float(self.time_span[0]), float(self.time_span[1])))
        object.__setattr__(self, "loglik_history", tuple(self.loglik_history))

    @property
    def n_components(self) -> int:
        return int(self.weights.size)

    @property
    def dim(self) -> int:
        return int(self.means.shape[1]) - 1


def _log_gauss(data: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    chol = np.linalg.cholesky(cov)
    dev = (data - mean).T
    sol = solve_triangular(chol, dev, lower=True)
    maha = np.sum(sol * sol, axis=0)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    k = data.shape[1]
    return -0.5 * (k * math.log(2.0 * math.pi) + logdet + maha)


def _kmeanspp_centers(data: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty((n, data.shape[1]))
    centers[0] = data[rng.integers(data.shape[0])]
    d2 = np.sum((data - centers[0]) ** 2, axis=1)
    for c in range(1, n):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(data.shape[0]))
        else:
            idx = int(rng.choice(data.shape[0], p=d2 / total))
        centers[c] = data[idx]
        d2 = np.minimum(d2, np.sum((data - centers[c]) ** 2, axis=1))
    return centers


def _moments(data: np.ndarray, resp: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    nk = resp.sum(axis=0)
    weights = nk / data.shape[0]
    means = (resp.T @ data) / nk[:, None]
    dim = data.shape[1]
    covs = np.empty((resp.shape[1], dim, dim))
    for c in range(resp.shape[1]):
        dev = data - means[c]
        covs[c] = (resp[:, c, None] * dev).T @ dev / nk[c]
        covs[c] += COV_REG * np.eye(dim)
    return weights, means, covs


def fit_gmm(data: np.ndarray, n_components: int, seed: int) -> GmmModel:
    """Fit a joint mixture with seeded k-means++ init and EM refinement.

    Stops when the relative log-likelihood improvement falls below 1e-6 or
    after 200 iterations.  Covariances are regularized with 1e-6 * I each
    M step.  A component whose weight collapses below 1e-8 is re-seeded on
    the worst-modeled sample once; a second collapse raises.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValidationError("data must be (M, 1+d) joint rows")
    if not np.all(np.isfinite(data)):
        raise ValidationError("non-finite sample in mixture input")
    m_samples, dim = data.shape
    if m_samples < n_components * (dim + 1):
        raise InsufficientDataError(
            f"{m_samples} samples cannot support {n_components} components")

    rng = np.random.default_rng(seed)
    centers = _kmeanspp_centers(data, n_components, rng)
    d2 = np.sum((data[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    assign = np.argmin(d2, axis=1)
    # hard one-hot responsibilities seed the first M step
    resp = np.zeros((m_samples, n_components))
    resp[np.arange(m_samples), assign] = 1.0
    empty = np.flatnonzero(resp.sum(axis=0) == 0)
    for c in empty:
        far = int(np.argmax(np.min(d2, axis=1)))
        resp[far] = 0.0
        resp[far, c] = 1.0
    weights, means, covs = _moments(data, resp)

    reseeded = False
    history: list[float] = []
    prev_ll = -np.inf
    for _ in range(EM_MAX_ITER):
        log_prob = np.empty((m_samples, n_components))
        for c in range(n_components):
            try:
                log_prob[:, c] = _log_gauss(data, means[c], covs[c])
            except np.linalg.LinAlgError:
                log_prob[:, c] = -np.inf
        log_weighted = log_prob + np.log(np.maximum(weights, 1e-300))
        norm = logsumexp(log_weighted, axis=1)
        ll = float(norm.sum())
        history.append(ll)
        resp = np.exp(log_weighted - norm[:, None])

        weights, means, covs = _moments(data, resp)
        collapsed = np.flatnonzero(weights < WEIGHT_FLOOR)
        if collapsed.size:
            if reseeded:
                raise DegenerateComponentError(
                    f"components {collapsed.tolist()} collapsed after re-seeding")
            reseeded = True
            global_cov = np.cov(data.T) + COV_REG * np.eye(dim)
            worst = int(np.argmin(norm))
            for c in collapsed:
                means[c] = data[worst]
                covs[c] = global_cov
                weights[c] = 1.0 / n_components
            weights = weights / weights.sum()
            prev_ll = -np.inf
            continue
        if np.isfinite(prev_ll) and ll - prev_ll < EM_REL_TOL * abs(prev_ll):
            break
        prev_ll = ll

    span = (float(data[:, 0].min()), float(data[:, 0].max()))
    return GmmModel(weights, means, covs, span, tuple(history))


def gmr_condition(model: GmmModel, times: np.ndarray) -> ProbTrajectory:
    """Condition the joint mixture on time.

    Blends per-component linear-Gaussian conditionals with the time
    responsibilities and moment-matches the blend into a single Gaussian
    per query time.  Output covariances are symmetrized and eigenvalue
    clamped to stay positive semidefinite.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValidationError("times must be a non-empty 1-D array")
    lo, hi = model.time_span
    if float(times.min()) < lo - 1e-9 or float(times.max()) > hi + 1e-9:
        logger.warning("conditioning outside fitted span [%.3f, %.3f]", lo, hi)

    mu_t = model.means[:, 0]
    mu_x = model.means[:, 1:]
    var_t = model.covariances[:, 0, 0]
    cov_xt = model.covariances[:, 1:, 0]
    cov_xx = model.covariances[:, 1:, 1:]

    gain = cov_xt / var_t[:, None]
    cond_cov = cov_xx - np.einsum("cd,ce->cde", gain, cov_xt)

    log_h = (np.log(np.maximum(model.weights, 1e-300))[None, :]
             - 0.5 * (np.log(2.0 * math.pi * var_t)[None, :]
                      + (times[:, None] - mu_t[None, :]) ** 2 / var_t[None, :]))
    norm = logsumexp(log_h, axis=1)
    if not np.all(np.isfinite(norm)):
        bad = float(times[int(np.argmin(np.isfinite(norm)))])
        raise ConditioningError(f"no component has support at t={bad:g}")
    h = np.exp(log_h - norm[:, None])

    cond_mean = mu_x[None, :, :] + (times[:, None, None] - mu_t[None, :, None]) \
        * gain[None, :, :]
    mean = np.einsum("qc,qcd->qd", h, cond_mean)
    second = np.einsum("qc,cde->qde", h, cond_cov) \
        + np.einsum("qc,qcd,qce->qde", h, cond_mean, cond_mean)
    cov = second - np.einsum("qd,qe->qde", mean, mean)
    cov = 0.5 * (cov + np.transpose(cov, (0, 2, 1)))
    eigval, eigvec = np.linalg.eigh(cov)
    eigval = np.maximum(eigval, 0.0)
    cov = np.einsum("qde,qe,qfe->qdf", eigvec, eigval, eigvec)
    cov = 0.5 * (cov + np.transpose(cov, (0, 2, 1)))
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
        raise ConditioningError("conditioning produced non-finite moments")
    return ProbTrajectory(times, mean, cov)


def model_to_dict(model: GmmModel) -> dict:
    return {
        "weights": model.weights.tolist(),
        "means": model.means.tolist(),
        "covs": [c.reshape(-1).tolist() for c in model.covariances],
        "time_span": list(model.time_span),
    }


def model_from_dict(obj: dict) -> GmmModel:
    means = np.asarray(obj["means"], dtype=float)
    k = means.shape[1]
    covs = np.asarray(obj["covs"], dtype=float).reshape(-1, k, k)
    return GmmModel(np.asarray(obj["weights"], dtype=float), means, covs,
                    (obj["time_span"][0], obj["time_span"][1]))
