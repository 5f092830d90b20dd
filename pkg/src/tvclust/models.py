"""Mixture model containers, log densities, and exact posteriors.

Two model families are supported:

* ``IsotropicGMM``: equally weighted components sharing one spherical
  variance, p(c) = 1/C and p(y|c) = N(y; mu_c, sigma2 * I).
* ``GeneralGMM``: per-component weight pi_c, mean mu_c and full covariance
  Sigma_c.

All mixture sums are evaluated in log space with max shifting so that the
small-variance regime does not underflow.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, NumericError

_LOG_2PI = math.log(2.0 * math.pi)

# Relative ridge added to covariance matrices produced by M-steps; keeps
# near-degenerate scatter matrices factorizable without perturbing
# user-supplied positive definite covariances at evaluation time.
COV_RIDGE = 1e-6


def logsumexp(a, axis=-1):
    """Max-shifted log(sum(exp(a))) along ``axis``; safe for -inf entries."""
    a = np.asarray(a, dtype=np.float64)
    amax = np.max(a, axis=axis, keepdims=True)
    amax = np.where(np.isfinite(amax), amax, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - amax), axis=axis))
    return out + np.squeeze(amax, axis=axis)


def squared_distances(points, means):
    """Pairwise squared Euclidean distances, shape (N, C)."""
    points = np.asarray(points, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if means.ndim == 1:
        means = means[:, None]
    diff = points[:, None, :] - means[None, :, :]
    return np.einsum("ncd,ncd->nc", diff, diff)


def sigma2_floor(points):
    """Smallest admissible shared variance for the given data.

    Defined as 1e-12 times the mean squared norm of the mean-centered data,
    with an absolute guard so that degenerate single-point data still yields
    a positive floor (a zero variance would make every log density infinite).
    """
    points = np.asarray(points, dtype=np.float64)
    centered = points - points.mean(axis=0)
    msq = float(np.mean(np.einsum("nd,nd->n", centered, centered)))
    return max(1e-12 * msq, float(np.finfo(np.float64).tiny))


def _as_readonly(arr, dtype=np.float64):
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class IsotropicGMM:
    """Equally weighted isotropic mixture: C means plus one shared variance."""

    means: np.ndarray  # (C, D)
    sigma2: float

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        if means.ndim == 1:
            means = means[:, None]
        means = _as_readonly(means)
        if means.ndim != 2 or means.size == 0:
            raise ConfigurationError("means must be a non-empty C x D matrix")
        if not np.all(np.isfinite(means)):
            raise ConfigurationError("means must be finite")
        sigma2 = float(self.sigma2)
        if not (sigma2 > 0.0 and math.isfinite(sigma2)):
            raise ConfigurationError(f"sigma2 must be positive and finite, got {sigma2}")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def c(self):
        return self.means.shape[0]

    @property
    def d(self):
        return self.means.shape[1]


@dataclass(frozen=True)
class GeneralGMM:
    """Weighted mixture with full per-component covariances."""

    weights: np.ndarray  # (C,)
    means: np.ndarray  # (C, D)
    covs: np.ndarray  # (C, D, D)

    def __post_init__(self):
        weights = _as_readonly(np.atleast_1d(self.weights))
        means = np.asarray(self.means, dtype=np.float64)
        if means.ndim == 1:
            means = means[:, None]
        means = _as_readonly(means)
        covs = _as_readonly(self.covs)
        if covs.ndim != 3 or covs.shape[1] != covs.shape[2]:
            raise ConfigurationError("covs must have shape (C, D, D)")
        c, d = means.shape
        if weights.shape != (c,) or covs.shape != (c, d, d):
            raise ConfigurationError("weights, means and covs disagree on C or D")
        if np.any(weights < 0.0) or not np.all(np.isfinite(weights)):
            raise ConfigurationError("weights must be nonnegative and finite")
        if abs(float(weights.sum()) - 1.0) > 1e-9:
            raise ConfigurationError(f"weights must sum to 1, got {weights.sum()!r}")
        if not np.all(np.isfinite(means)) or not np.all(np.isfinite(covs)):
            raise ConfigurationError("means and covs must be finite")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)

    @property
    def c(self):
        return self.means.shape[0]

    @property
    def d(self):
        return self.means.shape[1]


@dataclass(frozen=True)
class Responsibilities:
    """Per-point cluster distribution with explicit support.

    ``support[n]`` lists the clusters carrying mass for point n and
    ``weights[n]`` the matching probabilities (each row sums to 1).  Hard
    assignments use a single column of weight 1; dense posteriors list every
    cluster.
    """

    support: np.ndarray  # (N, K) int64
    weights: np.ndarray  # (N, K) float64
    n_clusters: int

    def __post_init__(self):
        support = _as_readonly(self.support, dtype=np.int64)
        weights = _as_readonly(self.weights)
        if support.ndim != 2 or support.shape != weights.shape:
            raise ConfigurationError("support and weights must share shape (N, K)")
        if support.shape[1] < 1 or support.shape[1] > self.n_clusters:
            raise ConfigurationError("support width must be in [1, n_clusters]")
        if np.any(support < 0) or np.any(support >= self.n_clusters):
            raise ConfigurationError("support indices out of range")
        if support.shape[1] > 1:
            srt = np.sort(support, axis=1)
            if np.any(srt[:, 1:] == srt[:, :-1]):
                raise ConfigurationError("support indices must be distinct per point")
        if np.any(weights < 0.0):
            raise ConfigurationError("responsibility weights must be nonnegative")
        if np.any(np.abs(weights.sum(axis=1) - 1.0) > 1e-12):
            raise ConfigurationError("responsibility rows must sum to 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self):
        return self.support.shape[0]

    @property
    def kind(self):
        if self.support.shape[1] == self.n_clusters:
            return "dense"
        if self.support.shape[1] == 1:
            return "binary"
        return "sparse"

    def dense(self):
        """Full (N, C) responsibility matrix with zeros off support."""
        out = np.zeros((self.n, self.n_clusters))
        np.put_along_axis(out, self.support, self.weights, axis=1)
        return out

    def hard_labels(self):
        """Index of the highest-weight cluster per point (ties: first)."""
        pick = np.argmax(self.weights, axis=1)
        return self.support[np.arange(self.n), pick]


def binary_responsibilities(labels, n_clusters):
    """Hard assignments as a one-column ``Responsibilities``."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1, 1)
    return Responsibilities(labels, np.ones_like(labels, dtype=np.float64), n_clusters)


def _chol_factors(model):
    """Cholesky factor per covariance; raises ``NumericError`` if not SPD."""
    factors = []
    for c, cov in enumerate(model.covs):
        try:
            factors.append(np.linalg.cholesky(cov))
        except np.linalg.LinAlgError:
            raise NumericError(
                f"covariance of cluster {c} is not positive definite"
            ) from None
    return factors


def log_joints(points, model):
    """Matrix of log p(c, y^(n)) with shape (N, C) for either model family."""
    points = _points_of(points)
    if isinstance(model, IsotropicGMM):
        d2 = squared_distances(points, model.means)
        norm = -math.log(model.c) - 0.5 * model.d * math.log(
            2.0 * math.pi * model.sigma2
        )
        return norm - d2 / (2.0 * model.sigma2)
    n, d = points.shape
    out = np.empty((n, model.c))
    factors = _chol_factors(model)
    with np.errstate(divide="ignore"):
        logw = np.log(model.weights)
    for c in range(model.c):
        chol = factors[c]
        z = np.linalg.solve(chol, (points - model.means[c]).T)
        maha = np.einsum("dn,dn->n", z, z)
        logdet = d * _LOG_2PI + 2.0 * np.sum(np.log(np.diag(chol)))
        out[:, c] = logw[c] - 0.5 * (logdet + maha)
    return out


def log_density_iso(y, c, model):
    """log N(y; mu_c, sigma2 * I) = -(D/2) log(2 pi sigma2) - |y-mu_c|^2 / (2 sigma2)."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    diff = y - model.means[c]
    return float(
        -0.5 * model.d * math.log(2.0 * math.pi * model.sigma2)
        - float(diff @ diff) / (2.0 * model.sigma2)
    )


def log_joint_general(y, c, model):
    """log pi_c - (1/2) log|2 pi Sigma_c| - (1/2) (y-mu_c)^T Sigma_c^{-1} (y-mu_c).

    The Mahalanobis term is computed through a triangular factorization;
    the covariance is never inverted explicitly.
    """
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    return float(log_joints(y, model)[0, c])


def responsibilities_exact(dataset, model):
    """Dense posterior p(c | y^(n)) for every point, via log-sum-exp."""
    points = _points_of(dataset)
    lj = log_joints(points, model)
    weights = np.exp(lj - logsumexp(lj, axis=1)[:, None])
    weights = weights / weights.sum(axis=1, keepdims=True)
    support = np.broadcast_to(np.arange(model.c), weights.shape)
    return Responsibilities(support.copy(), weights, model.c)


def regularize_covariances(covs):
    """Add the relative ridge lambda = COV_RIDGE * trace(S)/D to each matrix."""
    covs = np.array(covs, dtype=np.float64)
    d = covs.shape[-1]
    lam = COV_RIDGE * np.trace(covs, axis1=-2, axis2=-1) / d
    return covs + lam[:, None, None] * np.eye(d)


def _points_of(dataset):
    """Accept either a Dataset or a raw array of points."""
    points = getattr(dataset, "points", dataset)
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    return points


def model_to_snapshot(model):
    """JSON-ready dict for either model family."""
    if isinstance(model, IsotropicGMM):
        return {
            "kind": "iso",
            "means": model.means.tolist(),
            "sigma2": model.sigma2,
        }
    return {
        "kind": "general",
        "means": model.means.tolist(),
        "weights": model.weights.tolist(),
        "covs": model.covs.tolist(),
    }


def model_from_snapshot(snapshot):
    kind = snapshot.get("kind")
    if kind == "iso":
        return IsotropicGMM(np.asarray(snapshot["means"]), float(snapshot["sigma2"]))
    if kind == "general":
        return GeneralGMM(
            np.asarray(snapshot["weights"]),
            np.asarray(snapshot["means"]),
            np.asarray(snapshot["covs"]),
        )
    raise ConfigurationError(f"unknown model kind {kind!r}")


def save_model(model, path):
    Path(path).write_text(json.dumps(model_to_snapshot(model)), encoding="utf-8")


def load_model(path):
    return model_from_snapshot(json.loads(Path(path).read_text(encoding="utf-8")))
