"""Chernoff information between Gaussians and ASE-vs-LSE comparison statistics.

For multivariate normals F0 = N(mu0, Sigma0), F1 = N(mu1, Sigma1) the
Chernoff divergence at t in (0, 1) has the closed form

    t (1 - t) / 2 * d^T Sigma_t^{-1} d
        + 1/2 * log( |Sigma_t| / (|Sigma0|^t |Sigma1|^{1-t}) ),

with Sigma_t = t Sigma0 + (1 - t) Sigma1 and d = mu1 - mu0; the Chernoff
information is the supremum over t. Singular covariances are handled on
their common range: if the ranges of Sigma0 and Sigma1 differ, or the mean
difference leaves the common range, the divergence is infinite.

The block-separation statistics rho_a / rho_l are the minimum pairwise
Chernoff informations between the finite-n block-conditional Gaussians of
the two embedding methods; larger means a lower large-sample optimal error
for recovering block labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidT, NotPSD
from .limits import DENSE, GaussianParams, sbm_block_gaussians
from .model import BlockModelParams, mixture_from_block_model

RANK_REL_TOL = 1e-10
MEAN_RANGE_REL_TOL = 1e-8

#: seed grid size for the supremum search and golden-section tolerance
SEED_GRID_POINTS = 64
T_LOWER, T_UPPER = 1e-6, 1.0 - 1e-6
T_ABS_TOL = 1e-8
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ChernoffEval:
    """Supremum search result: argmax t_star, value, infinity flag, evaluations."""

    t_star: float | None
    value: float | None
    infinite: bool
    iterations: int

    def as_float(self) -> float:
        return math.inf if self.infinite else float(self.value)


def _psd_eig(cov: np.ndarray):
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    vals, vecs = np.linalg.eigh((cov + cov.T) / 2.0)
    scale = max(float(vals[-1]), 0.0)
    if vals[0] < -1e-10 * max(scale, 1.0):
        raise NotPSD(f"covariance eigenvalue {vals[0]} below tolerance")
    return np.clip(vals, 0.0, None), vecs


def gaussian_chernoff_divergence(g0: GaussianParams, g1: GaussianParams, t: float) -> float:
    """Chernoff divergence at a fixed t; math.inf for range-incompatible inputs."""
    if not 0.0 < t < 1.0:
        raise InvalidT(f"t must lie in (0, 1), got {t}")
    if g0.dim != g1.dim:
        raise ValueError(f"dimension mismatch: {g0.dim} vs {g1.dim}")
    w0, _ = _psd_eig(g0.cov)
    w1, _ = _psd_eig(g1.cov)
    sigma_t = t * g0.cov + (1.0 - t) * g1.cov
    wt, qt = _psd_eig(sigma_t)
    thresh = RANK_REL_TOL * max(float(w0[-1]), float(w1[-1]), float(wt[-1]), 0.0)
    rank0 = int(np.sum(w0 > thresh))
    rank1 = int(np.sum(w1 > thresh))
    rank_t = int(np.sum(wt > thresh))
    if not rank0 == rank1 == rank_t:
        return math.inf

    delta = g1.mean - g0.mean
    basis = qt[:, wt > thresh]
    norm = float(np.linalg.norm(delta))
    if norm > 0:
        outside = delta - basis @ (basis.T @ delta)
        if float(np.linalg.norm(outside)) > MEAN_RANGE_REL_TOL * norm:
            return math.inf
    if rank_t == 0:
        return 0.0

    s0 = basis.T @ g0.cov @ basis
    s1 = basis.T @ g1.cov @ basis
    st = basis.T @ sigma_t @ basis
    d = basis.T @ delta
    sign_t, logdet_t = np.linalg.slogdet(st)
    sign_0, logdet_0 = np.linalg.slogdet(s0)
    sign_1, logdet_1 = np.linalg.slogdet(s1)
    if min(sign_t, sign_0, sign_1) <= 0:
        raise NotPSD("restricted covariance lost positive definiteness")
    quad = float(d @ np.linalg.solve(st, d))
    return 0.5 * t * (1.0 - t) * quad + 0.5 * (
        logdet_t - t * logdet_0 - (1.0 - t) * logdet_1
    )


def gaussian_chernoff_information(g0: GaussianParams, g1: GaussianParams) -> ChernoffEval:
    """sup over t in (0,1) of the Chernoff divergence.

    A 64-point uniform seed grid locates the best bracket, golden-section
    refines it to |interval| < 1e-8 in t, and one parabolic polish step
    finishes. Returns the infinite flag without optimizing when the
    divergence is infinite (it then is infinite for every t).
    """
    evals = 1
    mid = gaussian_chernoff_divergence(g0, g1, 0.5)
    if math.isinf(mid):
        return ChernoffEval(t_star=None, value=None, infinite=True, iterations=evals)

    grid = np.linspace(T_LOWER, T_UPPER, SEED_GRID_POINTS)
    values = [gaussian_chernoff_divergence(g0, g1, t) for t in grid]
    evals += len(grid)
    if max(max(values), mid) < 1e-15:
        # Identical on the common range: divergence vanishes for every t.
        return ChernoffEval(t_star=0.5, value=0.0, infinite=False, iterations=evals)
    best = int(np.argmax(values))
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, len(grid) - 1)]

    # Golden-section maximization on [a, b].
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc = gaussian_chernoff_divergence(g0, g1, c)
    fd = gaussian_chernoff_divergence(g0, g1, d)
    evals += 2
    while b - a > T_ABS_TOL:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = gaussian_chernoff_divergence(g0, g1, c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = gaussian_chernoff_divergence(g0, g1, d)
        evals += 1
    t_star, value = (c, fc) if fc >= fd else (d, fd)

    # One parabolic polish pass through the final bracket.
    t_lo, t_hi = max(T_LOWER, t_star - T_ABS_TOL), min(T_UPPER, t_star + T_ABS_TOL)
    f_lo = gaussian_chernoff_divergence(g0, g1, t_lo)
    f_hi = gaussian_chernoff_divergence(g0, g1, t_hi)
    evals += 2
    denom = (t_hi - t_star) * (value - f_lo) + (t_star - t_lo) * (value - f_hi)
    if denom > 0:
        vertex = t_star + 0.5 * (
            (t_hi - t_star) ** 2 * (value - f_lo)
            - (t_star - t_lo) ** 2 * (value - f_hi)
        ) / denom
        vertex = min(max(vertex, T_LOWER), T_UPPER)
        f_vertex = gaussian_chernoff_divergence(g0, g1, vertex)
        evals += 1
        if f_vertex > value:
            t_star, value = vertex, f_vertex
    for t_cand, f_cand in ((t_lo, f_lo), (t_hi, f_hi)):
        if f_cand > value:
            t_star, value = t_cand, f_cand

    return ChernoffEval(
        t_star=float(t_star),
        value=max(float(value), 0.0),
        infinite=False,
        iterations=evals,
    )


def _min_pairwise_information(gaussians: list[GaussianParams]) -> float:
    """min over unordered pairs of the Chernoff information; inf when vacuous."""
    best = math.inf
    for k in range(len(gaussians)):
        for l in range(k + 1, len(gaussians)):
            ev = gaussian_chernoff_information(gaussians[k], gaussians[l])
            best = min(best, ev.as_float())
    return best


def rho_ase(B: np.ndarray, pi: np.ndarray, n: int) -> float:
    """Min pairwise Chernoff information of the ASE block Gaussians at size n."""
    params = BlockModelParams(block_probs=B, weights=pi)
    rank = int(np.sum(np.linalg.eigvalsh(params.block_probs) > 1e-10))
    F = mixture_from_block_model(params, rank)
    return _min_pairwise_information(sbm_block_gaussians(F, "ase", DENSE, n))


def rho_lse(B: np.ndarray, pi: np.ndarray, n: int) -> float:
    """Min pairwise Chernoff information of the LSE block Gaussians at size n."""
    params = BlockModelParams(block_probs=B, weights=pi)
    rank = int(np.sum(np.linalg.eigvalsh(params.block_probs) > 1e-10))
    F = mixture_from_block_model(params, rank)
    return _min_pairwise_information(sbm_block_gaussians(F, "lse", DENSE, n))


def rho_ase_two_block_approx(p: float, q: float, pi1: float, n: int) -> float:
    """Large-n, log-det-free approximation of rho_a for B = [[p^2, pq], [pq, q^2]].

    Cross-check only; the full rho_ase keeps the log-determinant terms,
    which matter in singular cases.
    """
    pi2 = 1.0 - pi1
    a = pi1 * p**4 * (1 - p**2) + pi2 * p * q**3 * (1 - p * q)
    b = pi1 * p**3 * q * (1 - p * q) + pi2 * q**4 * (1 - q**2)
    num = n * (p - q) ** 2 * (pi1 * p**2 + pi2 * q**2) ** 2
    return num / (2.0 * (math.sqrt(a) + math.sqrt(b)) ** 2)


def rho_lse_two_block_approx(p: float, q: float, pi1: float, n: int) -> float:
    """Large-n, log-det-free approximation of rho_l for B = [[p^2, pq], [pq, q^2]]."""
    pi2 = 1.0 - pi1
    a = pi1 * p * (1 - p**2) + pi2 * q * (1 - p * q)
    b = pi1 * p * (1 - p * q) + pi2 * q * (1 - q**2)
    num = 2.0 * n * (math.sqrt(p) - math.sqrt(q)) ** 2 * (pi1 * p + pi2 * q) ** 2
    return num / (math.sqrt(a) + math.sqrt(b)) ** 2


TWO_BLOCK_PQ = "two-block"
THREE_BLOCK_PQ = "three-block"

STATUS_OK = "ok"
STATUS_INF = "inf"
STATUS_INVALID = "invalid"


@dataclass(frozen=True)
class RatioGridCell:
    """One (p, r) cell of the rho_a / rho_l comparison grid."""

    p: float
    r: float
    rho_a: float | None
    rho_l: float | None
    ratio: float | None
    status: str


def _grid_block_probs(model: str, p: float, q: float) -> np.ndarray:
    if model == TWO_BLOCK_PQ:
        return np.array([[p * p, p * q], [p * q, q * q]])
    if model == THREE_BLOCK_PQ:
        return np.array([[p, q, q], [q, p, q], [q, q, p]])
    raise ValueError(f"model must be {TWO_BLOCK_PQ!r} or {THREE_BLOCK_PQ!r}, got {model!r}")


def rho_ratio_grid(
    p_values, r_values, pi, n: int, model: str = TWO_BLOCK_PQ
) -> list[RatioGridCell]:
    """rho_a / rho_l over a (p, r) grid with q = p + r, row-major in (p, r).

    Cells whose implied model is invalid (entries outside [0, 1], B not PSD,
    coincident blocks) or where either statistic is infinite are marked via
    the status column instead of raising.
    """
    pi = np.asarray(pi, dtype=float).reshape(-1)
    cells = []
    for p in p_values:
        for r in r_values:
            q = p + r
            try:
                if not (0 < p < 1 and 0 < q < 1):
                    raise ValueError("p and q must lie in (0, 1)")
                B = _grid_block_probs(model, p, q)
                ra = rho_ase(B, pi, n)
                rl = rho_lse(B, pi, n)
            except Exception:
                cells.append(RatioGridCell(p, r, None, None, None, STATUS_INVALID))
                continue
            if math.isinf(ra) or math.isinf(rl):
                cells.append(
                    RatioGridCell(
                        p,
                        r,
                        None if math.isinf(ra) else ra,
                        None if math.isinf(rl) else rl,
                        None,
                        STATUS_INF,
                    )
                )
            elif rl <= 0 or ra <= 0:
                cells.append(RatioGridCell(p, r, ra, rl, None, STATUS_INVALID))
            else:
                cells.append(RatioGridCell(p, r, ra, rl, ra / rl, STATUS_OK))
    return cells
