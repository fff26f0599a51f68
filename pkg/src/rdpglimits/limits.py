"""Closed-form limit quantities for ASE/LSE of point-mass-mixture RDPGs.

Every expectation over the latent distribution is an exact finite sum over
the mixture atoms, so the only error in these values is floating point.

Conventions. With mu = E[X], Delta = E[X X^T], mu_tilde = E[X / X.mu] and
Delta_tilde = E[X X^T / X.mu]:

* ASE row covariance (dense regime, rho = 1):
      Sigma(x) = Delta^{-1} E[X X^T (x.X - (x.X)^2)] Delta^{-1},
  and the vanishing-sparsity variant drops the quadratic term (x.X)^2.
  The scaled row residual sqrt(n) * (W Xhat_i - X_i) is asymptotically
  N(0, Sigma(X_i)).

* LSE row covariance (dense regime):
      SigmaT(x) = E[ v v^T (x.X - (x.X)^2) / x.mu ],
      v = Delta_tilde^{-1} X / X.mu  -  x / (2 x.mu),
  again dropping (x.X)^2 in the vanishing regime. The scaled residual is
  n * (W Xbreve_i - X_i / sqrt(sum_j X_i.X_j)).

* Frobenius limits: ||Xhat W - X||_F^2 and n ||Xbreve W - Xtilde||_F^2
  converge to the traces implemented in ase_frobenius_limit and
  lse_frobenius_limit.

* Within-block variances d_kk are defined on the eigenvector matrices (not
  the scaled embeddings); n^2 d_kk converges to the traces implemented in
  within_block_limit, which for invertible B reduce to closed forms in the
  entries of B alone (within_block_closed_form).

Finite-n Gaussian approximations for block-conditional rows divide the
covariances by n (ASE) and n^2 (LSE); LSE means use the simplification
n_k = n pi_k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyBlock, NonpositiveMeanInnerProduct, SingularB, SingularDelta
from .model import MixtureOfPointMasses

DENSE = "dense"
VANISHING = "vanishing"

_REGIMES = (DENSE, VANISHING)


@dataclass(frozen=True)
class MixtureMoments:
    """First/second moments of the latent mixture, plain and degree-normalized."""

    mu: np.ndarray
    delta: np.ndarray
    mu_tilde: np.ndarray
    delta_tilde: np.ndarray


@dataclass(frozen=True)
class GaussianParams:
    """Mean vector and symmetric PSD covariance of one limit Gaussian."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise ValueError(f"cov shape {cov.shape} does not match mean length {d}")
        if np.max(np.abs(cov - cov.T)) > 1e-12:
            raise ValueError("cov must be symmetric within 1e-12")
        scale = max(float(np.max(np.abs(cov))), 1.0)
        if np.linalg.eigvalsh(cov)[0] < -1e-10 * scale:
            raise ValueError("cov must be PSD up to -1e-10")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def _check_regime(regime: str):
    if regime not in _REGIMES:
        raise ValueError(f"regime must be one of {_REGIMES}, got {regime!r}")


def _solve_spd(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        sol = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularDelta(str(exc)) from exc
    if not np.all(np.isfinite(sol)):
        raise SingularDelta("solve produced non-finite entries")
    return sol


def moments(F: MixtureOfPointMasses) -> MixtureMoments:
    """Exact mixture moments mu, Delta, mu_tilde, Delta_tilde.

    Raises NonpositiveMeanInnerProduct(k) if any atom satisfies
    nu_k . mu <= 0, which would break the degree normalizations.
    """
    pi = F.weights
    nu = F.atoms
    mu = pi @ nu
    inner = nu @ mu
    bad = np.flatnonzero(inner <= 0)
    if bad.size:
        raise NonpositiveMeanInnerProduct(int(bad[0]))
    delta = (nu * pi[:, None]).T @ nu
    mu_tilde = (pi / inner) @ nu
    delta_tilde = (nu * (pi / inner)[:, None]).T @ nu
    return MixtureMoments(mu=mu, delta=delta, mu_tilde=mu_tilde, delta_tilde=delta_tilde)


def ase_row_cov(F: MixtureOfPointMasses, x: np.ndarray, regime: str = DENSE) -> np.ndarray:
    """Limit covariance of the scaled ASE row residual at latent position x."""
    _check_regime(regime)
    x = np.asarray(x, dtype=float).reshape(-1)
    m = moments(F)
    dots = F.atoms @ x
    weight = dots - dots**2 if regime == DENSE else dots
    inner = (F.atoms * (F.weights * weight)[:, None]).T @ F.atoms
    half = _solve_spd(m.delta, inner)
    cov = _solve_spd(m.delta, half.T).T
    return (cov + cov.T) / 2.0


def lse_row_cov(F: MixtureOfPointMasses, x: np.ndarray, regime: str = DENSE) -> np.ndarray:
    """Limit covariance of the scaled LSE row residual at latent position x."""
    _check_regime(regime)
    x = np.asarray(x, dtype=float).reshape(-1)
    m = moments(F)
    x_mu = float(x @ m.mu)
    if x_mu <= 0:
        raise NonpositiveMeanInnerProduct(-1)
    inner = F.atoms @ m.mu
    dots = F.atoms @ x
    weight = (dots - dots**2 if regime == DENSE else dots) / x_mu
    v = _solve_spd(m.delta_tilde, F.atoms.T).T / inner[:, None] - x / (2.0 * x_mu)
    cov = (v * (F.weights * weight)[:, None]).T @ v
    return (cov + cov.T) / 2.0


def block_mean_vectors(F: MixtureOfPointMasses, method: str, n: int) -> np.ndarray:
    """Block-conditional centroids at graph size n.

    ASE rows center on the atoms themselves; LSE rows center on
    nu_k / sqrt(n * sum_l pi_l nu_k . nu_l), using n_k = n pi_k.
    """
    if method == "ase":
        return F.atoms.copy()
    if method == "lse":
        m = moments(F)
        scale = np.sqrt(n * (F.atoms @ m.mu))
        return F.atoms / scale[:, None]
    raise ValueError(f"method must be 'ase' or 'lse', got {method!r}")


def sbm_block_gaussians(
    F: MixtureOfPointMasses, method: str, regime: str = DENSE, n: int = 1
) -> list[GaussianParams]:
    """Finite-n Gaussian approximation of the embedded rows, one per block.

    ASE: mean nu_k, covariance Sigma_k / n. LSE: mean nu_k / sqrt(n * nu_k.mu),
    covariance SigmaT_k / n^2. These feed the level curves and the oracle
    classifiers.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    means = block_mean_vectors(F, method, n)
    out = []
    for k in range(F.n_atoms):
        if method == "ase":
            cov = ase_row_cov(F, F.atoms[k], regime) / n
        else:
            cov = lse_row_cov(F, F.atoms[k], regime) / n**2
        out.append(GaussianParams(mean=means[k], cov=cov))
    return out


def ase_frobenius_limit(F: MixtureOfPointMasses, regime: str = DENSE) -> float:
    """Limit of ||Xhat W - X||_F^2 (dense) or its sparse analogue."""
    _check_regime(regime)
    m = moments(F)
    lin = F.atoms @ m.mu
    quad = np.einsum("ki,ij,kj->k", F.atoms, m.delta, F.atoms)
    weight = lin - quad if regime == DENSE else lin
    inner = (F.atoms * (F.weights * weight)[:, None]).T @ F.atoms
    half = _solve_spd(m.delta, inner)
    full = _solve_spd(m.delta, half.T).T
    return float(np.trace(full))


def lse_frobenius_limit(
    F: MixtureOfPointMasses, regime: str = DENSE, form: str = "pair"
) -> float:
    """Limit of n ||Xbreve W - Xtilde||_F^2 (dense) or its sparse analogue.

    The dense value has two algebraically equal expressions: a double
    expectation over an i.i.d. pair ('pair') and an expanded single/cross
    form ('expanded'); both are implemented and must agree to ~1e-10.
    """
    _check_regime(regime)
    if form not in ("pair", "expanded"):
        raise ValueError(f"form must be 'pair' or 'expanded', got {form!r}")
    pi = F.weights
    nu = F.atoms
    m = moments(F)
    inner = nu @ m.mu
    gram = nu @ nu.T

    if regime == VANISHING:
        dtinv_nu = _solve_spd(m.delta_tilde, nu.T).T
        dt2 = np.einsum("ki,ki->k", dtinv_nu, dtinv_nu)
        lin = nu @ m.mu_tilde
        term = np.sum(pi * (dt2 * lin - 0.75 * np.einsum("ki,ki->k", nu, nu)) / inner**2)
        return float(term)

    if form == "pair":
        dtinv_nu = _solve_spd(m.delta_tilde, nu.T).T
        total = 0.0
        for k in range(F.n_atoms):
            a = dtinv_nu[k] / inner[k] - nu / (2.0 * inner[:, None])
            h = (gram[k] - gram[k] ** 2) / inner
            total += pi[k] * float(np.sum(pi * h * np.einsum("li,li->l", a, a)))
        return total

    dtinv_nu = _solve_spd(m.delta_tilde, nu.T).T
    dt2 = np.einsum("ki,ki->k", dtinv_nu, dtinv_nu)
    lin_tilde = nu @ m.mu_tilde
    quad_tilde = np.einsum("ki,ij,kj->k", nu, m.delta_tilde, nu)
    norms = np.einsum("ki,ki->k", nu, nu)
    quad_plain = np.einsum("ki,ij,kj->k", nu, m.delta, nu)
    single = np.sum(
        pi * (dt2 * (lin_tilde - quad_tilde) - 0.75 * norms) / inner**2
    )
    cross = 0.0
    for k in range(F.n_atoms):
        cross += pi[k] * float(
            np.sum(pi * gram[k] ** 2 * (dtinv_nu @ nu[k]) / (inner[k] * inner**2))
        )
    corr = np.sum(pi * norms * quad_plain / (4.0 * inner**3))
    return float(single + cross - corr)


def within_block_limit(
    F: MixtureOfPointMasses, k: int, method: str, regime: str = DENSE
) -> float:
    """Limit of n^2 * (within-block variance of block k's eigenvector rows)."""
    _check_regime(regime)
    if not 0 <= k < F.n_atoms:
        raise ValueError(f"block index {k} out of range for {F.n_atoms} blocks")
    pi = F.weights
    nu = F.atoms
    m = moments(F)
    inner = nu @ m.mu
    dots = nu @ nu[k]
    weight = dots - dots**2 if regime == DENSE else dots

    if method == "ase":
        M = (nu * (pi * weight)[:, None]).T @ nu
        t = _solve_spd(m.delta, M)
        t = _solve_spd(m.delta, t)
        t = _solve_spd(m.delta, t)
        return float(np.trace(t))
    if method == "lse":
        mu_k = inner[k]
        u = nu / inner[:, None] - (m.delta_tilde @ nu[k]) / (2.0 * mu_k)
        N = (u * (pi * weight / mu_k)[:, None]).T @ u
        t = _solve_spd(m.delta_tilde, N)
        t = _solve_spd(m.delta_tilde, t)
        t = _solve_spd(m.delta_tilde, t)
        return float(np.trace(t))
    raise ValueError(f"method must be 'ase' or 'lse', got {method!r}")


def within_block_closed_form(
    B: np.ndarray, pi: np.ndarray, k: int, method: str
) -> float:
    """Within-block variance limit written purely in the entries of invertible B.

    ASE: sum_{l,l'} B_kl (1 - B_kl) (B^{-1}_{ll'})^2 / (pi_l pi_l').
    LSE: zeta_1 - zeta_2 + zeta_3 with mu_k = sum_l pi_l B_kl.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    pi = np.asarray(pi, dtype=float).reshape(-1)
    K = B.shape[0]
    if B.shape != (K, K) or pi.shape[0] != K:
        raise ValueError("B must be K x K and pi length K")
    if not 0 <= k < K:
        raise ValueError(f"block index {k} out of range for {K} blocks")
    try:
        Binv = np.linalg.inv(B)
    except np.linalg.LinAlgError as exc:
        raise SingularB(str(exc)) from exc
    if not np.all(np.isfinite(Binv)):
        raise SingularB("inverse produced non-finite entries")
    var = B[k] * (1.0 - B[k])

    if method == "ase":
        return float(np.sum(var[:, None] * Binv**2 / np.outer(pi, pi)))
    if method == "lse":
        mu = B @ pi
        zeta1 = float(
            np.sum(var[:, None] * Binv**2 * mu[None, :] / (np.outer(pi, pi) * mu[k]))
        )
        zeta2 = float(np.sum(var * Binv[k]) / (pi[k] * mu[k]))
        zeta3 = float(np.sum(pi * var) / (4.0 * pi[k] * mu[k] ** 2))
        return zeta1 - zeta2 + zeta3
    raise ValueError(f"method must be 'ase' or 'lse', got {method!r}")


def empirical_within_block(
    eigvecs: np.ndarray, labels: np.ndarray, k: int, l: int
) -> float:
    """Mean squared distance of block-k eigenvector rows to the block-l centroid.

    Operates on the orthonormal eigenvector matrix (not the scaled embedding)
    with 1-based block labels.
    """
    eigvecs = np.atleast_2d(np.asarray(eigvecs, dtype=float))
    labels = np.asarray(labels).reshape(-1)
    rows_k = eigvecs[labels == k]
    rows_l = eigvecs[labels == l]
    if rows_k.shape[0] == 0:
        raise EmptyBlock(k)
    if rows_l.shape[0] == 0:
        raise EmptyBlock(l)
    centroid = rows_l.mean(axis=0)
    return float(np.mean(np.sum((rows_k - centroid) ** 2, axis=1)))
