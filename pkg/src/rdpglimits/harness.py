"""Seeded Monte Carlo experiments against the closed-form limits.

Per-replicate seeds are base_seed + replicate_index (retries shift the key
into a disjoint 128-bit range), so replicates are independent, reproducible
and order-insensitive; results are always reduced in replicate-index order.
Zero-degree replicates are retried up to 3 times with fresh seeds and then
recorded as failures, never silently dropped.

The CLT checks read the theorems literally: one fixed-index row residual per
replicate (rows within one graph are dependent), scaled by sqrt(n) for ASE
against X and by n for LSE against the degree-normalized latents.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.stats

from . import cluster as _cluster
from . import embed as _embed
from . import limits as _limits
from .chernoff import rho_ase, rho_lse
from .errors import ConfigError, ZeroDegreeVertex
from .model import (
    BlockModelParams,
    MixtureOfPointMasses,
    mixture_from_block_model,
    probability_matrix,
    sample_rdpg,
)

MAX_RETRIES = 3
_RETRY_STRIDE = 1 << 64
_CLUSTER_SEED_LANE = 1 << 96  # keeps clustering draws independent of sampling draws

KMEANS = "kmeans"
GMM = "gmm"
LINEAR_ORACLE = "linear_oracle"
BAYES_ORACLE = "bayes_oracle"

_SAMPLED_CLUSTERERS = (KMEANS, GMM)
_ORACLE_CLUSTERERS = (LINEAR_ORACLE, BAYES_ORACLE)


def replicate_seed(base_seed: int, index: int, attempt: int = 0) -> int:
    """Injective per-replicate (and per-retry) Philox key."""
    return base_seed + index + attempt * _RETRY_STRIDE


@dataclass(frozen=True)
class ExperimentConfig:
    """Shared configuration for the Monte Carlo experiments."""

    model: BlockModelParams
    n_values: tuple[int, ...]
    replicates: int
    base_seed: int
    regime: str = _limits.DENSE
    methods: tuple[str, ...] = (_embed.ASE, _embed.LSE)
    clusterers: tuple[str, ...] = (KMEANS, GMM, LINEAR_ORACLE, BAYES_ORACLE)
    restarts: int = 10
    fixed_index: int = 0
    noiseless: bool = False
    oracle_samples: int = 200_000
    n_jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "clusterers", tuple(self.clusterers))
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not self.n_values:
            raise ConfigError("n_values must be nonempty")
        unknown = set(self.methods) - {_embed.ASE, _embed.LSE}
        if unknown:
            raise ConfigError(f"methods contains unknown entries {sorted(unknown)}")
        unknown = set(self.clusterers) - set(_SAMPLED_CLUSTERERS + _ORACLE_CLUSTERERS)
        if unknown:
            raise ConfigError(f"clusterers contains unknown entries {sorted(unknown)}")

    def mixture(self) -> MixtureOfPointMasses:
        rank = int(np.sum(np.linalg.eigvalsh(self.model.block_probs) > 1e-10))
        return mixture_from_block_model(self.model, rank)


def _embed_one(A, method: str, d: int):
    if method == _embed.ASE:
        return _embed.ase(A, d)
    return _embed.lse(A, d)


def _aligned_residual(sample, method: str, d: int, noiseless: bool):
    """Embedding residual matrix (Y W - target) for one replicate."""
    if noiseless:
        matrix = probability_matrix(sample.latents, sample.sparsity)
    else:
        matrix = sample.adjacency
    emb = _embed_one(matrix, method, d)
    if method == _embed.ASE:
        target = math.sqrt(sample.sparsity) * sample.latents
    else:
        target = _embed.tilde_latents(sample.latents)
    alignment = _embed.procrustes_align(emb.rows, target)
    return emb.rows @ alignment.rotation - target


def _run_with_retries(task, config: ExperimentConfig, index: int):
    """Run one replicate, retrying zero-degree draws with shifted seeds."""
    last_exc = None
    for attempt in range(MAX_RETRIES + 1):
        seed = replicate_seed(config.base_seed, index, attempt)
        try:
            return task(seed)
        except ZeroDegreeVertex as exc:
            last_exc = exc
    return ("failed", index, repr(last_exc))


def _map_replicates(worker, config: ExperimentConfig, args_list):
    if config.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            return list(pool.map(worker, args_list, chunksize=1))
    return [worker(args) for args in args_list]


# ---------------------------------------------------------------------------
# CLT check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CltBlockStats:
    """Residual statistics for one (n, method, block)."""

    n: int
    method: str
    block: int
    count: int
    empirical_cov: np.ndarray
    theoretical_cov: np.ndarray
    rel_frobenius_error: float
    coverage: float


@dataclass(frozen=True)
class CltReport:
    config: ExperimentConfig
    blocks: list[CltBlockStats]
    failures: int = 0


def _clt_replicate(args):
    config, n, index = args

    def task(seed):
        F = config.mixture()
        sample = sample_rdpg(F, n, 1.0, seed)
        d = F.dim
        out = {}
        for method in config.methods:
            residual = _aligned_residual(sample, method, d, config.noiseless)
            scale = math.sqrt(n) if method == _embed.ASE else float(n)
            out[method] = scale * residual[config.fixed_index]
        return ("ok", index, int(sample.labels[config.fixed_index]), out)

    return _run_with_retries(task, config, index)


def run_clt_check(config: ExperimentConfig) -> CltReport:
    """Compare empirical residual covariances of a fixed row to the limits.

    For each replicate: sample, embed, Procrustes-align to the latents (ASE)
    or their degree normalization (LSE), keep the fixed row's scaled
    residual. Residuals are grouped by the block of that row; coverage is
    the fraction inside the theoretical 95% ellipsoid (chi-square quantile).
    """
    if config.regime != _limits.DENSE:
        raise ConfigError("regime: CLT sampling checks run in the dense regime")
    F = config.mixture()
    d = F.dim
    chi2_95 = scipy.stats.chi2.ppf(0.95, df=d)
    blocks: list[CltBlockStats] = []
    failures = 0
    for n in config.n_values:
        args_list = [(config, n, r) for r in range(config.replicates)]
        results = _map_replicates(_clt_replicate, config, args_list)
        by_method = {m: {"labels": [], "rows": []} for m in config.methods}
        for res in results:
            if res[0] == "failed":
                failures += 1
                continue
            _, _, label, rows = res
            for method in config.methods:
                by_method[method]["labels"].append(label)
                by_method[method]["rows"].append(rows[method])
        for method in config.methods:
            labels = np.asarray(by_method[method]["labels"])
            rows = np.asarray(by_method[method]["rows"])
            for k in range(F.n_atoms):
                sel = rows[labels == k + 1]
                if method == _embed.ASE:
                    theo = _limits.ase_row_cov(F, F.atoms[k], config.regime)
                else:
                    theo = _limits.lse_row_cov(F, F.atoms[k], config.regime)
                if sel.shape[0] < 2:
                    continue
                emp = np.cov(sel, rowvar=False, ddof=1).reshape(d, d)
                rel = float(
                    np.linalg.norm(emp - theo) / max(np.linalg.norm(theo), 1e-300)
                )
                mahal = np.einsum(
                    "ni,ij,nj->n", sel, np.linalg.inv(theo), sel
                )
                coverage = float(np.mean(mahal <= chi2_95))
                blocks.append(
                    CltBlockStats(
                        n=n,
                        method=method,
                        block=k + 1,
                        count=int(sel.shape[0]),
                        empirical_cov=emp,
                        theoretical_cov=theo,
                        rel_frobenius_error=rel,
                        coverage=coverage,
                    )
                )
    return CltReport(config=config, blocks=blocks, failures=failures)


# ---------------------------------------------------------------------------
# Frobenius-limit check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrobeniusRow:
    n: int
    method: str
    empirical: float
    theoretical: float
    ratio: float
    stderr: float
    replicates: int


def _frobenius_replicate(args):
    config, n, index = args

    def task(seed):
        F = config.mixture()
        sample = sample_rdpg(F, n, 1.0, seed)
        d = F.dim
        out = {}
        for method in config.methods:
            residual = _aligned_residual(sample, method, d, config.noiseless)
            norm2 = float(np.sum(residual**2))
            out[method] = norm2 if method == _embed.ASE else n * norm2
        return ("ok", index, out)

    return _run_with_retries(task, config, index)


def run_frobenius_check(config: ExperimentConfig) -> list[FrobeniusRow]:
    """Scaled embedding Frobenius errors averaged per n, against the limits."""
    if config.regime != _limits.DENSE:
        raise ConfigError("regime: Frobenius sampling checks run in the dense regime")
    F = config.mixture()
    theoretical = {
        _embed.ASE: _limits.ase_frobenius_limit(F, config.regime),
        _embed.LSE: _limits.lse_frobenius_limit(F, config.regime),
    }
    rows: list[FrobeniusRow] = []
    for n in config.n_values:
        args_list = [(config, n, r) for r in range(config.replicates)]
        results = _map_replicates(_frobenius_replicate, config, args_list)
        values = {m: [] for m in config.methods}
        for res in results:
            if res[0] == "failed":
                continue
            for method in config.methods:
                values[method].append(res[2][method])
        for method in config.methods:
            vals = np.asarray(values[method])
            mean = float(vals.mean())
            stderr = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
            theo = theoretical[method]
            rows.append(
                FrobeniusRow(
                    n=n,
                    method=method,
                    empirical=mean,
                    theoretical=theo,
                    ratio=mean / theo,
                    stderr=stderr,
                    replicates=len(vals),
                )
            )
    return rows


# ---------------------------------------------------------------------------
# Clustering experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClusteringRow:
    n: int
    method: str
    clusterer: str
    mean_error: float
    stderr: float
    replicates: int


def _clustering_replicate(args):
    config, n, index = args

    def task(seed):
        F = config.mixture()
        sample = sample_rdpg(F, n, 1.0, seed)
        d = F.dim
        K = F.n_atoms
        out = {}
        for method in config.methods:
            matrix = sample.adjacency
            emb = _embed_one(matrix, method, d)
            for clusterer in config.clusterers:
                if clusterer not in _SAMPLED_CLUSTERERS:
                    continue
                cluster_seed = seed + _CLUSTER_SEED_LANE
                if clusterer == KMEANS:
                    result = _cluster.kmeans(emb.rows, K, cluster_seed, config.restarts)
                else:
                    result = _cluster.gmm_em(emb.rows, K, cluster_seed, config.restarts)
                out[(method, clusterer)] = _cluster.error_rate(
                    result.labels, sample.labels, K
                )
        return ("ok", index, out)

    return _run_with_retries(task, config, index)


def run_clustering_experiment(config: ExperimentConfig) -> list[ClusteringRow]:
    """Mean block-recovery error per (n, method, clusterer), with oracle rows.

    The kmeans/gmm rows come from clustering the sampled embeddings; the
    oracle rows evaluate the Bayes and nearest-centroid rules under the
    theoretical block Gaussians for the same (n, method).
    """
    if config.regime != _limits.DENSE:
        raise ConfigError("regime: clustering experiments run in the dense regime")
    F = config.mixture()
    rows: list[ClusteringRow] = []
    sampled = [c for c in config.clusterers if c in _SAMPLED_CLUSTERERS]
    oracles = [c for c in config.clusterers if c in _ORACLE_CLUSTERERS]
    for n in config.n_values:
        if sampled:
            args_list = [(config, n, r) for r in range(config.replicates)]
            results = _map_replicates(_clustering_replicate, config, args_list)
            errors = {key: [] for key in ((m, c) for m in config.methods for c in sampled)}
            for res in results:
                if res[0] == "failed":
                    continue
                for key, value in res[2].items():
                    errors[key].append(value)
            for (method, clusterer), vals in errors.items():
                arr = np.asarray(vals)
                rows.append(
                    ClusteringRow(
                        n=n,
                        method=method,
                        clusterer=clusterer,
                        mean_error=float(arr.mean()),
                        stderr=float(arr.std(ddof=1) / math.sqrt(len(arr)))
                        if len(arr) > 1
                        else 0.0,
                        replicates=len(arr),
                    )
                )
        for method in config.methods:
            if not oracles:
                continue
            gaussians = _limits.sbm_block_gaussians(F, method, config.regime, n)
            rates = _cluster.oracle_rates(
                gaussians,
                F.weights,
                rng_seed=replicate_seed(config.base_seed, 0),
                samples=config.oracle_samples,
            )
            for clusterer in oracles:
                if clusterer == BAYES_ORACLE:
                    mean, se = rates.bayes_rate, rates.bayes_stderr
                else:
                    mean, se = rates.linear_rate, rates.linear_stderr
                rows.append(
                    ClusteringRow(
                        n=n,
                        method=method,
                        clusterer=clusterer,
                        mean_error=mean,
                        stderr=se,
                        replicates=rates.samples,
                    )
                )
    return rows


# ---------------------------------------------------------------------------
# Two- and three-block replication experiments
# ---------------------------------------------------------------------------

TWO_BLOCK_A = "TwoBlockA"
TWO_BLOCK_B = "TwoBlockB"
THREE_BLOCK_A = "ThreeBlockA"
THREE_BLOCK_B = "ThreeBlockB"


def _pq_two_block(p: float, q: float) -> np.ndarray:
    return np.array([[p * p, p * q], [p * q, q * q]])


def _pq_three_block(p: float, q: float) -> np.ndarray:
    return np.array([[p, q, q], [q, p, q], [q, q, p]])


REPLICATION_PRESETS = {
    TWO_BLOCK_A: dict(n=200, B=_pq_two_block(0.75, 0.6), pi=(0.6, 0.4)),
    TWO_BLOCK_B: dict(n=400, B=_pq_two_block(0.2, 0.3), pi=(0.6, 0.4)),
    THREE_BLOCK_A: dict(n=800, B=_pq_three_block(0.9, 0.72), pi=(0.8, 0.1, 0.1)),
    THREE_BLOCK_B: dict(n=1600, B=_pq_three_block(0.34, 0.15), pi=(0.8, 0.1, 0.1)),
}


@dataclass(frozen=True)
class ReplicationReport:
    """GMM-on-embedding error rates plus the Chernoff comparison for one preset."""

    which: str
    n: int
    replicates: int
    gmm_ase_error: float
    gmm_ase_stderr: float
    gmm_lse_error: float
    gmm_lse_stderr: float
    rho_a: float
    rho_l: float
    rho_ratio: float
    failures: int = 0


def run_section43_replication(
    which: str,
    replicates: int = 1000,
    base_seed: int = 20180201,
    n_jobs: int = 1,
    restarts: int = 10,
) -> ReplicationReport:
    """Replicate one of the four built-in clustering comparisons."""
    if which not in REPLICATION_PRESETS:
        raise ConfigError(
            f"which must be one of {sorted(REPLICATION_PRESETS)}, got {which!r}"
        )
    preset = REPLICATION_PRESETS[which]
    model = BlockModelParams(block_probs=preset["B"], weights=np.asarray(preset["pi"]))
    config = ExperimentConfig(
        model=model,
        n_values=(preset["n"],),
        replicates=replicates,
        base_seed=base_seed,
        methods=(_embed.ASE, _embed.LSE),
        clusterers=(GMM,),
        restarts=restarts,
        n_jobs=n_jobs,
    )
    rows = run_clustering_experiment(config)
    by_method = {row.method: row for row in rows if row.clusterer == GMM}
    rho_a = rho_ase(model.block_probs, model.weights, preset["n"])
    rho_l = rho_lse(model.block_probs, model.weights, preset["n"])
    done = min(by_method[m].replicates for m in (_embed.ASE, _embed.LSE))
    return ReplicationReport(
        which=which,
        n=preset["n"],
        replicates=done,
        gmm_ase_error=by_method[_embed.ASE].mean_error,
        gmm_ase_stderr=by_method[_embed.ASE].stderr,
        gmm_lse_error=by_method[_embed.LSE].mean_error,
        gmm_lse_stderr=by_method[_embed.LSE].stderr,
        rho_a=rho_a,
        rho_l=rho_l,
        rho_ratio=rho_a / rho_l if math.isfinite(rho_a) and math.isfinite(rho_l) else math.nan,
        failures=replicates - done,
    )
