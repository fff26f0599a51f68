"""Finite-mixture latent distributions and RDPG/SBM graph sampling.

A stochastic blockmodel with positive semidefinite block probability matrix B
is a random dot product graph whose latent distribution is a mixture of K
point masses; the atoms are rows of any V with V V^T = B. Edge probabilities
are rho * X_i . X_j, and graphs are symmetric, hollow and 0/1.

All sampling is driven by the counter-based Philox generator keyed directly
with a 64-bit integer seed, so per-replicate seeds base_seed + index give
independent streams and identical seeds reproduce bit-identical samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPSD, ProbabilityOutOfRange, RankMismatch

# Tolerances for user-entered matrices (roundoff accommodation).
PSD_EIG_TOL = 1e-10
WEIGHT_SUM_TOL = 1e-12
GRAM_TOL = 1e-10


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed with the integer seed."""
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    return np.random.Generator(np.random.Philox(key=seed))


@dataclass(frozen=True)
class MixtureOfPointMasses:
    """Latent distribution placing weight pi_k on atom nu_k in R^d.

    Attributes
    ----------
    weights : (K,) ndarray
        Strictly positive probabilities summing to 1.
    atoms : (K, d) ndarray
        Rows are the latent positions. All pairwise inner products must lie
        in [0, 1] (valid edge probabilities) and the second-moment matrix
        sum_k pi_k nu_k nu_k^T must have full rank d.
    """

    weights: np.ndarray
    atoms: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "atoms", atoms)
        if weights.shape[0] != atoms.shape[0]:
            raise ValueError(
                f"got {weights.shape[0]} weights for {atoms.shape[0]} atoms"
            )
        if np.any(weights <= 0):
            raise ValueError("all mixture weights must be strictly positive")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {weights.sum()}, not 1")
        gram = atoms @ atoms.T
        if gram.min() < -GRAM_TOL or gram.max() > 1.0 + GRAM_TOL:
            raise ValueError(
                "atom inner products must lie in [0, 1]; "
                f"range is [{gram.min()}, {gram.max()}]"
            )
        second_moment = (atoms * weights[:, None]).T @ atoms
        eigvals = np.linalg.eigvalsh(second_moment)
        if eigvals[0] <= PSD_EIG_TOL:
            raise ValueError(
                "second-moment matrix of the mixture is rank deficient; "
                f"smallest eigenvalue {eigvals[0]}"
            )

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]


@dataclass(frozen=True)
class BlockModelParams:
    """Stochastic blockmodel parameters: block probabilities B and weights pi."""

    block_probs: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.block_probs, dtype=float))
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        object.__setattr__(self, "block_probs", B)
        object.__setattr__(self, "weights", weights)
        if B.shape[0] != B.shape[1]:
            raise ValueError(f"block_probs must be square, got {B.shape}")
        if not np.allclose(B, B.T, atol=1e-12, rtol=0):
            raise ValueError("block_probs must be symmetric")
        if B.min() < 0 or B.max() > 1:
            raise ValueError("block_probs entries must lie in [0, 1]")
        if weights.shape[0] != B.shape[0]:
            raise ValueError(
                f"got {weights.shape[0]} weights for {B.shape[0]} blocks"
            )
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError("weights must be strictly positive and sum to 1")
        if np.linalg.eigvalsh(B)[0] < -PSD_EIG_TOL:
            raise NotPSD(
                f"block_probs has eigenvalue {np.linalg.eigvalsh(B)[0]} < -{PSD_EIG_TOL}"
            )

    @property
    def n_blocks(self) -> int:
        return self.block_probs.shape[0]


@dataclass(frozen=True)
class RdpgSample:
    """One sampled graph: latents X, sparsity rho, adjacency A, block labels."""

    latents: np.ndarray
    sparsity: float
    adjacency: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        A = self.adjacency
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"adjacency must be square, got {A.shape}")
        if not (0 < self.sparsity <= 1):
            raise ValueError(f"sparsity must lie in (0, 1], got {self.sparsity}")
        if np.any(np.diagonal(A) != 0):
            raise ValueError("adjacency must be hollow")
        if not np.array_equal(A, A.T):
            raise ValueError("adjacency must be symmetric")
        vals = np.unique(A)
        if not np.isin(vals, (0, 1)).all():
            raise ValueError("adjacency entries must be 0/1")

    @property
    def n_vertices(self) -> int:
        return self.adjacency.shape[0]


def mixture_from_block_model(params: BlockModelParams, rank: int) -> MixtureOfPointMasses:
    """Factor B = V V^T and return the point-mass mixture with atoms = rows of V.

    The factorization is via the eigendecomposition B = Q Lambda Q^T with
    eigenvalues sorted descending, V = Q_d Lambda_d^{1/2}. Atoms are only
    canonical up to orthogonal transforms; we fix signs by making the first
    nonzero entry of each eigenvector positive.

    Raises
    ------
    NotPSD
        If B has an eigenvalue below -1e-10.
    RankMismatch
        If `rank` disagrees with the numerical rank of B (eigenvalues > 1e-10).
    """
    B = params.block_probs
    eigvals, eigvecs = np.linalg.eigh(B)
    if eigvals[0] < -PSD_EIG_TOL:
        raise NotPSD(f"min eigenvalue {eigvals[0]} < -{PSD_EIG_TOL}")
    # Descending order.
    eigvals = eigvals[::-1]
    eigvecs = eigvecs[:, ::-1]
    numerical_rank = int(np.sum(eigvals > PSD_EIG_TOL))
    if rank != numerical_rank:
        raise RankMismatch(
            f"requested rank {rank} but numerical rank of B is {numerical_rank}"
        )
    vecs = eigvecs[:, :rank].copy()
    for j in range(rank):
        nz = np.flatnonzero(np.abs(vecs[:, j]) > 1e-12)
        if nz.size and vecs[nz[0], j] < 0:
            vecs[:, j] = -vecs[:, j]
    atoms = vecs * np.sqrt(np.clip(eigvals[:rank], 0.0, None))
    reconstruction = atoms @ atoms.T
    if np.max(np.abs(reconstruction - B)) > GRAM_TOL:
        raise RankMismatch(
            "factorization does not reproduce B within tolerance; "
            f"max deviation {np.max(np.abs(reconstruction - B))}"
        )
    return MixtureOfPointMasses(weights=params.weights, atoms=atoms)


def _sample_latents(F: MixtureOfPointMasses, n: int, rng: np.random.Generator):
    labels = rng.choice(F.n_atoms, size=n, p=F.weights) + 1
    return F.atoms[labels - 1], labels


def sample_latents(F: MixtureOfPointMasses, n: int, rng_seed: int):
    """Draw n i.i.d. latent rows from the mixture.

    Returns
    -------
    X : (n, d) ndarray
        Latent positions, row i equal to the atom of the drawn component.
    labels : (n,) ndarray
        1-based component indices.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return _sample_latents(F, n, make_rng(rng_seed))


def _check_edge_probabilities(P: np.ndarray, include_diagonal: bool):
    n = P.shape[0]
    iu = np.triu_indices(n, k=0 if include_diagonal else 1)
    vals = P[iu]
    bad = np.flatnonzero((vals < 0) | (vals > 1))
    if bad.size:
        b = bad[0]
        raise ProbabilityOutOfRange(int(iu[0][b]), int(iu[1][b]), float(vals[b]))


def _sample_graph(X: np.ndarray, rho: float, rng: np.random.Generator) -> np.ndarray:
    P = rho * (X @ X.T)
    _check_edge_probabilities(P, include_diagonal=False)
    n = X.shape[0]
    u = rng.random((n, n))
    upper = np.triu(u < P, k=1)
    return (upper + upper.T).astype(np.int8)


def sample_graph(X: np.ndarray, rho: float, rng_seed: int) -> np.ndarray:
    """Sample a symmetric hollow 0/1 adjacency with P(edge ij) = rho * X_i . X_j.

    Raises ProbabilityOutOfRange naming the first offending pair (i, j) if
    any off-diagonal probability falls outside [0, 1].
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return _sample_graph(X, rho, make_rng(rng_seed))


def probability_matrix(X: np.ndarray, rho: float) -> np.ndarray:
    """Edge probability matrix P = rho * X X^T, validated entrywise to [0, 1]."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    P = rho * (X @ X.T)
    _check_edge_probabilities(P, include_diagonal=True)
    return P


def sample_rdpg(
    F: MixtureOfPointMasses, n: int, rho: float, rng_seed: int
) -> RdpgSample:
    """Sample latents then a graph from one seeded stream."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = make_rng(rng_seed)
    X, labels = _sample_latents(F, n, rng)
    A = _sample_graph(X, rho, rng)
    return RdpgSample(latents=X, sparsity=rho, adjacency=A, labels=labels)
