import math

import numpy as np
import pytest

from rdpglimits import BlockModelParams, MixtureOfPointMasses, mixture_from_block_model


def two_block_pq(p, q):
    return np.array([[p * p, p * q], [p * q, q * q]])


@pytest.fixture
def example_model():
    """The two-block model used throughout the clustering experiments."""
    B = np.array([[0.42, 0.42], [0.42, 0.5]])
    return BlockModelParams(block_probs=B, weights=np.array([0.6, 0.4]))


@pytest.fixture
def example_mixture(example_model):
    return mixture_from_block_model(example_model, 2)


@pytest.fixture
def er_mixture():
    """Single latent position p = 0.7 (Erdos-Renyi with edge probability p^2)."""
    return MixtureOfPointMasses(weights=np.array([1.0]), atoms=np.array([[0.7]]))


def random_mixture(rng, max_blocks=4, lo=0.25, hi=0.7):
    """Well-conditioned random point-mass mixture (valid gram, full rank)."""
    while True:
        K = int(rng.integers(1, max_blocks + 1))
        d = int(rng.integers(1, K + 1))
        atoms = rng.uniform(lo, hi, size=(K, d)) / math.sqrt(d)
        gram = atoms @ atoms.T
        if gram.max() > 1.0:
            continue
        if d > 1 and np.linalg.matrix_rank(atoms, tol=1e-3) < d:
            continue
        weights = rng.uniform(0.5, 2.0, size=K)
        weights /= weights.sum()
        try:
            F = MixtureOfPointMasses(weights=weights, atoms=atoms)
        except ValueError:
            continue
        moments_cond = np.linalg.cond((atoms * weights[:, None]).T @ atoms)
        if moments_cond < 100:
            return F


def random_invertible_mixture(rng, K):
    """Random mixture with K = d linearly independent atoms (invertible gram)."""
    while True:
        base = np.eye(K) * rng.uniform(0.5, 0.9) + rng.uniform(0.05, 0.25, size=(K, K))
        radius = rng.uniform(0.6, 0.95, size=(K, 1))
        atoms = base / np.linalg.norm(base, axis=1)[:, None] * radius
        gram = atoms @ atoms.T
        if gram.max() > 1.0 or gram.min() < 0.0 or np.linalg.cond(gram) > 50:
            continue
        weights = rng.uniform(0.5, 2.0, size=K)
        weights /= weights.sum()
        try:
            return MixtureOfPointMasses(weights=weights, atoms=atoms)
        except ValueError:
            continue
