"""K-means, full-covariance Gaussian-mixture EM, and block-recovery scoring.

Both clusterers are deterministic given (points, K, seed, restarts) and keep
their classical monotonicity guarantees: Lloyd iterations never increase the
inertia and EM never decreases the log-likelihood (up to roundoff). Error
rates are permutation-matched: the reported rate is the minimum
misclassification fraction over all relabelings of the predicted clusters.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.stats
from scipy.special import logsumexp

from .errors import CovarianceCollapse, DegeneratePoints, TooManyBlocks
from .limits import GaussianParams
from .model import make_rng

KMEANS_MAX_ITER = 300
GMM_MAX_ITER = 500
GMM_TOL_ABS = 1e-8
GMM_TOL_REL = 2e-5
GMM_RIDGE = 1e-8
MONOTONE_SLACK = 1e-10


@dataclass(frozen=True)
class ClusteringResult:
    """Labels (1-based), centers, optional fitted Gaussian mixture, and fit quality."""

    labels: np.ndarray
    centers: np.ndarray
    model: list[GaussianParams] | None
    model_weights: np.ndarray | None
    loglik_or_inertia: float
    converged: bool
    restarts_used: int


def _kmeanspp_centers(points: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((K, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    dist2 = np.sum((points - centers[0]) ** 2, axis=1)
    for k in range(1, K):
        total = dist2.sum()
        if total <= 0:
            # All remaining mass sits on already-chosen centers.
            centers[k] = points[rng.integers(n)]
            continue
        idx = rng.choice(n, p=dist2 / total)
        centers[k] = points[idx]
        dist2 = np.minimum(dist2, np.sum((points - centers[k]) ** 2, axis=1))
    return centers


def _assign(points: np.ndarray, centers: np.ndarray):
    d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(points.shape[0]), labels].sum())
    return labels, d2, inertia


def _lloyd(points: np.ndarray, K: int, rng: np.random.Generator):
    centers = _kmeanspp_centers(points, K, rng)
    labels, d2, inertia = _assign(points, centers)
    converged = False
    for _ in range(KMEANS_MAX_ITER):
        for k in range(K):
            mask = labels == k
            if mask.any():
                centers[k] = points[mask].mean(axis=0)
            else:
                # Re-seed an empty cluster at the point worst served so far.
                worst = int(np.argmax(d2[np.arange(points.shape[0]), labels]))
                centers[k] = points[worst]
        new_labels, d2, new_inertia = _assign(points, centers)
        if new_inertia > inertia + MONOTONE_SLACK * max(1.0, inertia):
            raise AssertionError(
                f"k-means inertia increased: {inertia} -> {new_inertia}"
            )
        if np.array_equal(new_labels, labels):
            labels, inertia = new_labels, new_inertia
            converged = True
            break
        labels, inertia = new_labels, new_inertia
    return labels, centers, inertia, converged


def kmeans(points: np.ndarray, K: int, rng_seed: int, restarts: int = 10) -> ClusteringResult:
    """Lloyd iterations from k-means++ seeding; best inertia over restarts."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[0]
    if n < K:
        raise ValueError(f"need at least K={K} points, got {n}")
    if np.unique(points, axis=0).shape[0] < K:
        raise DegeneratePoints(f"fewer than K={K} distinct points")
    rng = make_rng(rng_seed)
    best = None
    for _ in range(restarts):
        labels, centers, inertia, converged = _lloyd(points, K, rng)
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia, converged)
    labels, centers, inertia, converged = best
    return ClusteringResult(
        labels=labels + 1,
        centers=centers,
        model=None,
        model_weights=None,
        loglik_or_inertia=inertia,
        converged=converged,
        restarts_used=restarts,
    )


def _mvn_logpdf(points: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    d = mean.shape[0]
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise CovarianceCollapse(f"component covariance not PD: {exc}") from exc
    solved = np.linalg.solve(chol, (points - mean).T)
    quad = np.sum(solved**2, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diagonal(chol)))
    return -0.5 * (quad + logdet + d * math.log(2.0 * math.pi))


def _gmm_m_step(points: np.ndarray, resp: np.ndarray, ridge_floor: float):
    n, d = points.shape
    counts = resp.sum(axis=0)
    weights = counts / n
    means = (resp.T @ points) / counts[:, None]
    covs = []
    for k in range(resp.shape[1]):
        centered = points - means[k]
        cov = (resp[:, k][:, None] * centered).T @ centered / counts[k]
        # Components owning a single point have exactly zero trace; the floor
        # (same 1e-8 magnitude, anchored to the data scale) keeps them PD.
        ridge = GMM_RIDGE * np.trace(cov) / d + ridge_floor
        covs.append(cov + ridge * np.eye(d))
    return weights, means, covs


def _gmm_e_step(points: np.ndarray, weights, means, covs):
    K = len(covs)
    log_joint = np.empty((points.shape[0], K))
    for k in range(K):
        log_joint[:, k] = np.log(weights[k]) + _mvn_logpdf(points, means[k], covs[k])
    norm = logsumexp(log_joint, axis=1)
    resp = np.exp(log_joint - norm[:, None])
    return resp, float(norm.sum())


def _em_once(points: np.ndarray, K: int, hard: np.ndarray, tol_rel: float):
    n, d = points.shape
    resp = np.zeros((n, K))
    resp[np.arange(n), hard] = 1.0
    resp += 1e-10  # keep every component alive through the first M-step
    resp /= resp.sum(axis=1, keepdims=True)
    data_cov = np.cov(points, rowvar=False, ddof=0).reshape(d, d)
    ridge_floor = GMM_RIDGE * max(np.trace(data_cov), np.finfo(float).tiny) / d

    loglik = -math.inf
    converged = False
    weights = means = covs = None
    for _ in range(GMM_MAX_ITER):
        weights, means, covs = _gmm_m_step(points, resp, ridge_floor)
        resp, new_loglik = _gmm_e_step(points, weights, means, covs)
        if new_loglik < loglik - MONOTONE_SLACK * max(1.0, abs(loglik)):
            raise AssertionError(
                f"EM log-likelihood decreased: {loglik} -> {new_loglik}"
            )
        gain = new_loglik - loglik
        loglik = new_loglik
        if gain < max(GMM_TOL_ABS, tol_rel * abs(loglik)):
            converged = True
            break
    return resp, weights, means, covs, loglik, converged


def gmm_em(
    points: np.ndarray,
    K: int,
    rng_seed: int,
    restarts: int = 10,
    tol_rel: float = GMM_TOL_REL,
) -> ClusteringResult:
    """Full-covariance EM; each restart starts from a converged k-means run.

    Every restart performs a k-means++-seeded Lloyd pass and hands its hard
    assignments to EM as initial responsibilities; EM stops once the
    log-likelihood gain drops below max(1e-8, tol_rel * |loglik|), an early
    stop that keeps the fit in the basin of the initial partition instead of
    migrating to spiky maximum-likelihood solutions. Best final
    log-likelihood over restarts wins.

    Component covariances carry a diagonal ridge of 1e-8 * trace / d (floored
    at the data scale so single-point components stay PD); if a ridged
    covariance still fails its Cholesky the run aborts with
    CovarianceCollapse.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = points.shape
    if n < K * (d + 1):
        raise ValueError(f"need at least K*(d+1)={K * (d + 1)} points, got {n}")
    rng = make_rng(rng_seed)
    best = None
    for _ in range(restarts):
        hard, _, _, _ = _lloyd(points, K, rng)
        out = _em_once(points, K, hard, tol_rel)
        if best is None or out[4] > best[4]:
            best = out
    resp, weights, means, covs, loglik, converged = best
    labels = np.argmax(resp, axis=1) + 1
    model = [GaussianParams(mean=means[k], cov=covs[k]) for k in range(K)]
    return ClusteringResult(
        labels=labels,
        centers=np.asarray(means),
        model=model,
        model_weights=np.asarray(weights),
        loglik_or_inertia=loglik,
        converged=converged,
        restarts_used=restarts,
    )


def error_rate(predicted: np.ndarray, truth: np.ndarray, K: int) -> float:
    """Minimum misclassification fraction over all K! relabelings.

    Both label vectors take values in {1..K}; K is capped at 10 because the
    matching enumerates permutations of a K x K confusion matrix.
    """
    predicted = np.asarray(predicted).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if predicted.shape != truth.shape:
        raise ValueError("label vectors must have equal length")
    if K > 10:
        raise TooManyBlocks(f"K={K} exceeds the permutation-matching cap of 10")
    for name, arr in (("predicted", predicted), ("truth", truth)):
        if arr.min() < 1 or arr.max() > K:
            raise ValueError(f"{name} labels must lie in 1..{K}")
    n = truth.shape[0]
    confusion = np.zeros((K, K), dtype=np.int64)
    np.add.at(confusion, (predicted - 1, truth - 1), 1)
    best_hits = max(
        sum(confusion[perm[j], j] for j in range(K))
        for perm in itertools.permutations(range(K))
    )
    return 1.0 - best_hits / n


@dataclass(frozen=True)
class OracleRates:
    """Monte Carlo error rates of the Bayes and nearest-centroid rules."""

    bayes_rate: float
    bayes_stderr: float
    linear_rate: float
    linear_stderr: float
    samples: int


def oracle_rates(
    gaussians: list[GaussianParams],
    weights: np.ndarray,
    rng_seed: int,
    samples: int = 200_000,
) -> OracleRates:
    """Error rates of the Bayes-optimal and nearest-theoretical-centroid rules.

    Draws from the given Gaussian mixture; the Bayes rule assigns by maximum
    posterior under the true mixture, the linear rule by closest mean.
    """
    weights = np.asarray(weights, dtype=float).reshape(-1)
    K = len(gaussians)
    if weights.shape[0] != K or abs(weights.sum() - 1.0) > 1e-10:
        raise ValueError("weights must match the mixture and sum to 1")
    rng = make_rng(rng_seed)
    z = rng.choice(K, size=samples, p=weights)
    d = gaussians[0].dim
    points = np.empty((samples, d))
    for k in range(K):
        mask = z == k
        count = int(mask.sum())
        if count == 0:
            continue
        vals, vecs = np.linalg.eigh(gaussians[k].cov)
        factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
        points[mask] = gaussians[k].mean + rng.standard_normal((count, d)) @ factor.T

    log_post = np.empty((samples, K))
    for k in range(K):
        log_post[:, k] = np.log(weights[k]) + scipy.stats.multivariate_normal(
            mean=gaussians[k].mean, cov=gaussians[k].cov, allow_singular=True
        ).logpdf(points)
    bayes_pred = np.argmax(log_post, axis=1)

    means = np.vstack([g.mean for g in gaussians])
    d2 = np.sum((points[:, None, :] - means[None, :, :]) ** 2, axis=2)
    linear_pred = np.argmin(d2, axis=1)

    bayes_rate = float(np.mean(bayes_pred != z))
    linear_rate = float(np.mean(linear_pred != z))
    return OracleRates(
        bayes_rate=bayes_rate,
        bayes_stderr=math.sqrt(bayes_rate * (1.0 - bayes_rate) / samples),
        linear_rate=linear_rate,
        linear_stderr=math.sqrt(linear_rate * (1.0 - linear_rate) / samples),
        samples=samples,
    )
