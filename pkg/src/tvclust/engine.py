"""Seeding, M-steps, iteration kernels, and the convergence loop.

Five algorithms share one loop:

* ``kmeans``: nearest-center hard assignment, mean update; the shared
  variance is still updated each iteration (it never feeds back into the
  mean path, whose updates are variance-independent for singleton sets).
* ``kmeans_cprime``: nearest-C' truncation sets, sparse posteriors, mean
  and variance updates.
* ``lazy_kmeans``: carried singleton sets updated by the lazy rule,
  otherwise the k-means updates.
* ``em_gmm``: exact EM for the general weighted mixture.
* ``sigma_pi``: hard assignment by the weight/covariance-aware score,
  general-model M-step driven by those hard assignments.

A run converges once the truncation sets (or hard shadow labels for exact
EM) stop changing and the largest relative parameter change drops below
``tol``.  Every iteration appends a TraceRecord; the restricted-sum free
energy recorded there is non-decreasing for every kernel (empty-cluster
reseeds of the general model are the only event that may break this, and
they are flagged in the record).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, make_rng
from .diagnostics import TraceRecord, free_energy_trunc, log_likelihood, objective_j
from .errors import ConfigurationError, NumericError
from .models import (
    GeneralGMM,
    IsotropicGMM,
    Responsibilities,
    _points_of,
    binary_responsibilities,
    regularize_covariances,
    responsibilities_exact,
    sigma2_floor,
    squared_distances,
)
from .truncation import (
    TruncationState,
    lazy_reassign,
    select_nearest,
    sigma_pi_scores,
    truncated_responsibilities,
)

ALGORITHMS = ("kmeans", "em_gmm", "kmeans_cprime", "lazy_kmeans", "sigma_pi")
SEEDINGS = ("uniform", "dsquared")


@dataclass(frozen=True)
class RunConfig:
    """Complete, validated description of one fitting run."""

    algorithm: str
    c: int
    c_prime: int | None = None
    epsilon: float | None = None
    seeding: str = "dsquared"
    max_iters: int = 200
    tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}")
        if self.c < 1:
            raise ConfigurationError("c must be >= 1")
        if self.algorithm == "kmeans_cprime":
            if self.c_prime is None:
                raise ConfigurationError("kmeans_cprime requires c_prime")
            if not 1 <= self.c_prime <= self.c:
                raise ConfigurationError("c_prime must be in [1, c]")
        elif self.c_prime is not None:
            raise ConfigurationError(f"{self.algorithm} does not take c_prime")
        if self.algorithm == "lazy_kmeans":
            if self.epsilon is None:
                raise ConfigurationError("lazy_kmeans requires epsilon")
            if self.epsilon < 0:
                raise ConfigurationError("epsilon must be >= 0")
        elif self.epsilon is not None:
            raise ConfigurationError(f"{self.algorithm} does not take epsilon")
        if self.seeding not in SEEDINGS:
            raise ConfigurationError(f"unknown seeding {self.seeding!r}")
        if self.max_iters < 0:
            raise ConfigurationError("max_iters must be >= 0")
        if not self.tol >= 0:
            raise ConfigurationError("tol must be >= 0")

    def to_dict(self):
        return {
            "algorithm": self.algorithm,
            "c": self.c,
            "c_prime": self.c_prime,
            "epsilon": self.epsilon,
            "seeding": self.seeding,
            "max_iters": self.max_iters,
            "tol": self.tol,
            "seed": self.seed,
        }


@dataclass
class FitResult:
    """Final model and posteriors plus the per-iteration trace."""

    model: IsotropicGMM | GeneralGMM
    responsibilities: Responsibilities
    state: TruncationState | None
    trace: list[TraceRecord] = field(default_factory=list)
    reason: str = "max_iters"


# ---------------------------------------------------------------------------
# seeding


def seed_uniform(dataset, c, rng):
    """c distinct data points drawn uniformly without replacement."""
    points = _points_of(dataset)
    n = points.shape[0]
    if not 1 <= c <= n:
        raise ConfigurationError(f"need 1 <= c <= N, got c={c}, N={n}")
    idx = rng.choice(n, size=c, replace=False)
    return points[idx].copy()


def seed_dsquared(dataset, c, rng, initial=None):
    """Distance-squared weighted seeding.

    The first center is uniform (or forced via ``initial``); each further
    center is a data point drawn with probability proportional to its
    squared distance to the nearest center chosen so far.  If all remaining
    mass is zero (duplicate data), falls back to a uniform draw among the
    indices not yet chosen.
    """
    points = _points_of(dataset)
    n = points.shape[0]
    if not 1 <= c <= n:
        raise ConfigurationError(f"need 1 <= c <= N, got c={c}, N={n}")
    chosen = np.empty(c, dtype=np.int64)
    chosen[0] = int(rng.integers(n)) if initial is None else int(initial)
    min_d2 = squared_distances(points, points[chosen[:1]])[:, 0]
    for k in range(1, c):
        total = float(min_d2.sum())
        if total > 0.0:
            idx = int(rng.choice(n, p=min_d2 / total))
        else:
            remaining = np.setdiff1d(np.arange(n), chosen[:k])
            idx = int(remaining[rng.integers(remaining.size)])
        chosen[k] = idx
        min_d2 = np.minimum(
            min_d2, squared_distances(points, points[idx : idx + 1])[:, 0]
        )
    return points[chosen].copy()


# ---------------------------------------------------------------------------
# M-steps


def _weighted_means(points, resp):
    n, d = points.shape
    c = resp.n_clusters
    mass = np.zeros(c)
    np.add.at(mass, resp.support.ravel(), resp.weights.ravel())
    wsum = np.zeros((c, d))
    contrib = (resp.weights[:, :, None] * points[:, None, :]).reshape(-1, d)
    np.add.at(wsum, resp.support.ravel(), contrib)
    means = np.zeros((c, d))
    nonempty = mass > 0.0
    means[nonempty] = wsum[nonempty] / mass[nonempty, None]
    return means, mass


def _reseed_empty_means(points, resp, means, mass):
    """Move zero-mass cluster means to the worst-fit data points.

    The k-th empty cluster lands on the k-th largest distance between a
    point and its currently assigned (new) center.  Zero-mass clusters sit
    outside every truncation set, so this move leaves the recorded free
    energy of the isotropic models untouched.
    """
    empty = np.flatnonzero(mass == 0.0)
    if empty.size == 0:
        return means, []
    labels = resp.hard_labels()
    diff = points - means[labels]
    dist = np.einsum("nd,nd->n", diff, diff)
    order = np.argsort(-dist, kind="stable")
    means = means.copy()
    events = []
    for k, cl in enumerate(empty):
        idx = int(order[min(k, order.size - 1)])
        means[cl] = points[idx]
        events.append(f"reseeded empty cluster {cl} at point {idx}")
    return means, events


def m_step_iso(dataset, resp):
    """Weighted mean update, then the shared-variance update with new means.

    sigma2 = (1/(D N)) sum_n sum_c q_c^(n) |y^(n) - mu_c^new|^2, clamped at
    the data-derived floor.  Returns the model and any reseed events.
    """
    points = _points_of(dataset)
    n, d = points.shape
    means, mass = _weighted_means(points, resp)
    means, events = _reseed_empty_means(points, resp, means, mass)
    diff = points[:, None, :] - means[resp.support]
    sq = np.einsum("nkd,nkd->nk", diff, diff)
    sigma2 = float(np.sum(resp.weights * sq)) / (d * n)
    sigma2 = max(sigma2, sigma2_floor(points))
    return IsotropicGMM(means, sigma2), events


def m_step_general(dataset, resp):
    """Weighted means, scatter covariances and mixing weights.

    Covariances are normalized by responsibility mass, symmetrized, and
    ridge-regularized once.  Zero-mass clusters keep weight 0 and fall back
    to the global mean and covariance; reviving them is the caller's policy.
    """
    points = _points_of(dataset)
    n, d = points.shape
    c = resp.n_clusters
    w = resp.dense()
    mass = w.sum(axis=0)
    nonempty = mass > 0.0
    means = np.zeros((c, d))
    wsum = w.T @ points
    means[nonempty] = wsum[nonempty] / mass[nonempty, None]
    gmean = points.mean(axis=0)
    means[~nonempty] = gmean
    diff = points[:, None, :] - means[None, :, :]
    covs = np.einsum("nc,ncd,nce->cde", w, diff, diff)
    covs[nonempty] /= mass[nonempty, None, None]
    if np.any(~nonempty):
        centered = points - gmean
        covs[~nonempty] = (centered.T @ centered) / n
    covs = 0.5 * (covs + np.transpose(covs, (0, 2, 1)))
    covs = regularize_covariances(covs)
    weights = mass / n
    weights = weights / weights.sum()
    return GeneralGMM(weights, means, covs)


def _revive_empty_general(points, resp, model, prev):
    """Reseed zero-weight clusters of a general-model M-step output.

    The revived cluster is centered on the worst-fit point, keeps its
    previous covariance, and receives weight 1/N (other weights rescaled).
    Unlike the isotropic case this rescaling can lower the recorded free
    energy, so the event is always traced.
    """
    empty = np.flatnonzero(model.weights == 0.0)
    if empty.size == 0:
        return model, []
    labels = resp.hard_labels()
    diff = points - model.means[labels]
    dist = np.einsum("nd,nd->n", diff, diff)
    order = np.argsort(-dist, kind="stable")
    n = points.shape[0]
    means = model.means.copy()
    covs = model.covs.copy()
    weights = model.weights * (1.0 - empty.size / n)
    events = []
    for k, cl in enumerate(empty):
        idx = int(order[min(k, order.size - 1)])
        means[cl] = points[idx]
        covs[cl] = prev.covs[cl]
        weights[cl] = 1.0 / n
        events.append(f"reseeded empty cluster {cl} at point {idx}")
    weights = weights / weights.sum()
    return GeneralGMM(weights, means, covs), events


# ---------------------------------------------------------------------------
# iteration kernels


def kmeans_step(dataset, means):
    """One Lloyd iteration: nearest-center assignment, then mean update.

    No variance is involved anywhere on this path.  Returns the binary
    assignments, the new means, and any reseed events.
    """
    points = _points_of(dataset)
    means = np.asarray(means, dtype=np.float64)
    if means.ndim == 1:
        means = means[:, None]
    state = select_nearest(points, means, 1)
    resp = binary_responsibilities(state.sets[:, 0], means.shape[0])
    new_means, mass = _weighted_means(points, resp)
    new_means, events = _reseed_empty_means(points, resp, new_means, mass)
    return resp, new_means, events


def tvem_step(dataset, model, c_prime):
    """Full variational iteration: nearest-C' sets, sparse posteriors, M-step.

    The recorded free energy never decreases across this step.  With
    c_prime = 1 the mean path coincides with ``kmeans_step``; with
    c_prime = C it is one exact EM iteration for the isotropic model.
    """
    state = select_nearest(dataset, model.means, c_prime)
    resp = truncated_responsibilities(dataset, model, state)
    new_model, events = m_step_iso(dataset, resp)
    return state, resp, new_model, events


def lazy_step(dataset, model, epsilon, state):
    """Lazy reassignment followed by the standard k-means updates."""
    new_state = lazy_reassign(dataset, model.means, epsilon, state)
    resp = binary_responsibilities(new_state.sets[:, 0], model.c)
    new_model, events = m_step_iso(dataset, resp)
    return new_state, resp, new_model, events


def em_gmm_step(dataset, model):
    """One exact EM iteration for the general weighted mixture."""
    points = _points_of(dataset)
    resp = responsibilities_exact(points, model)
    new_model = m_step_general(points, resp)
    new_model, events = _revive_empty_general(points, resp, new_model, model)
    return resp, new_model, events


def sigma_pi_step(dataset, model):
    """Hard assignment by minimal score, then the general-model M-step.

    The score argmin is a full singleton-set E-step for the general model;
    equal weights with identical isotropic covariances reduce it to the
    nearest-center rule.
    """
    points = _points_of(dataset)
    labels = np.argmin(sigma_pi_scores(points, model), axis=1)
    resp = binary_responsibilities(labels, model.c)
    new_model = m_step_general(points, resp)
    new_model, events = _revive_empty_general(points, resp, new_model, model)
    return resp, new_model, events


# ---------------------------------------------------------------------------
# the loop


def _param_vector(model):
    if isinstance(model, IsotropicGMM):
        return np.concatenate([model.means.ravel(), [model.sigma2]])
    return np.concatenate(
        [model.weights, model.means.ravel(), model.covs.ravel()]
    )


def _rel_change(old, new):
    a = _param_vector(old)
    b = _param_vector(new)
    return float(np.max(np.abs(b - a))) / max(1.0, float(np.max(np.abs(a))))


def _count_changed(old_state, old_resp, new_state, new_resp):
    if new_state is None:
        return int(np.sum(old_resp.hard_labels() != new_resp.hard_labels()))
    return int(
        np.sum(np.any(old_state.sorted_sets() != new_state.sorted_sets(), axis=1))
    )


def _record(iteration, dataset, algorithm, model, resp, state, n_changed, events):
    points = _points_of(dataset)
    n, d = points.shape
    j = objective_j(points, resp, model.means)
    if isinstance(model, IsotropicGMM):
        sigma2 = model.sigma2
        f = free_energy_trunc(points, model, state)
        ll = log_likelihood(points, model)
    elif algorithm == "em_gmm":
        sigma2 = j / (d * n)
        ll = log_likelihood(points, model)
        f = ll
    else:
        sigma2 = j / (d * n)
        f = free_energy_trunc(points, model, state)
        ll = log_likelihood(points, model)
    return TraceRecord(
        iteration=iteration,
        J=j,
        F=f,
        L=ll,
        gap=ll - f,
        sigma2=sigma2,
        n_changed=n_changed,
        events=list(events),
    )


def _initial_state(dataset, config, rng):
    points = _points_of(dataset)
    n, d = points.shape
    if config.seeding == "uniform":
        means0 = seed_uniform(points, config.c, rng)
    else:
        means0 = seed_dsquared(points, config.c, rng)
    nearest1 = select_nearest(points, means0, 1)
    hard0 = binary_responsibilities(nearest1.sets[:, 0], config.c)
    sigma2_0 = max(
        objective_j(points, hard0, means0) / (d * n), sigma2_floor(points)
    )
    if config.algorithm in ("kmeans", "kmeans_cprime", "lazy_kmeans"):
        cp = config.c_prime if config.algorithm == "kmeans_cprime" else 1
        model = IsotropicGMM(means0, sigma2_0)
        state = nearest1 if cp == 1 else select_nearest(points, means0, cp)
        resp = truncated_responsibilities(points, model, state)
        return model, resp, state
    covs0 = np.broadcast_to(sigma2_0 * np.eye(d), (config.c, d, d)).copy()
    model = GeneralGMM(np.full(config.c, 1.0 / config.c), means0, covs0)
    if config.algorithm == "sigma_pi":
        labels = np.argmin(sigma_pi_scores(points, model), axis=1)
        state = TruncationState(labels[:, None], 1)
        resp = binary_responsibilities(labels, config.c)
        return model, resp, state
    resp = responsibilities_exact(points, model)
    return model, resp, None


def run(dataset, config):
    """Iterate the configured kernel until convergence or max_iters.

    Deterministic given (dataset, config).  The trace holds one record per
    iteration plus an initial record for the seeded state; numeric failures
    are annotated on the trace and re-raised.
    """
    if not isinstance(dataset, Dataset):
        dataset = Dataset(np.asarray(dataset))
    if config.c > dataset.n:
        raise ConfigurationError(
            f"c={config.c} exceeds the number of data points N={dataset.n}"
        )
    rng = make_rng(config.seed)
    model, resp, state = _initial_state(dataset, config, rng)
    trace = [_record(0, dataset, config.algorithm, model, resp, state, dataset.n, [])]
    reason = "max_iters"
    for it in range(1, config.max_iters + 1):
        try:
            if config.algorithm in ("kmeans", "kmeans_cprime"):
                cp = config.c_prime if config.algorithm == "kmeans_cprime" else 1
                new_state, new_resp, new_model, events = tvem_step(dataset, model, cp)
            elif config.algorithm == "lazy_kmeans":
                new_state, new_resp, new_model, events = lazy_step(
                    dataset, model, config.epsilon, state
                )
            elif config.algorithm == "em_gmm":
                new_resp, new_model, events = em_gmm_step(dataset, model)
                new_state = None
            else:
                new_resp, new_model, events = sigma_pi_step(dataset, model)
                new_state = TruncationState(new_resp.support, 1)
            n_changed = _count_changed(state, resp, new_state, new_resp)
            rel = _rel_change(model, new_model)
            model, resp, state = new_model, new_resp, new_state
            trace.append(
                _record(
                    it, dataset, config.algorithm, model, resp, state, n_changed, events
                )
            )
        except NumericError as exc:
            trace[-1].events.append(f"numeric failure at iteration {it}: {exc}")
            exc.trace = trace
            raise
        if n_changed == 0 and rel < config.tol:
            reason = "converged"
            break
    return FitResult(model, resp, state, trace, reason)
