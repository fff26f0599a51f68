import numpy as np
import pytest

from rdpglimits import (
    BlockModelParams,
    MixtureOfPointMasses,
    ase_frobenius_limit,
    ase_row_cov,
    empirical_within_block,
    lse_frobenius_limit,
    lse_row_cov,
    mixture_from_block_model,
    moments,
    sbm_block_gaussians,
    within_block_closed_form,
    within_block_limit,
)
from rdpglimits.errors import EmptyBlock, SingularB
from rdpglimits.limits import DENSE, VANISHING

from conftest import random_invertible_mixture, random_mixture, two_block_pq

ER_P = 0.7


def er_mix(p=ER_P):
    return MixtureOfPointMasses(np.array([1.0]), np.array([[p]]))


def pq_mix(p=0.75, q=0.6, pi1=0.6):
    params = BlockModelParams(two_block_pq(p, q), np.array([pi1, 1 - pi1]))
    return mixture_from_block_model(params, 1)


class TestMoments:
    def test_single_atom(self):
        m = moments(er_mix())
        assert np.allclose(m.mu, ER_P)
        assert np.allclose(m.delta, ER_P**2)
        assert np.allclose(m.mu_tilde, 1 / ER_P)
        assert np.allclose(m.delta_tilde, 1.0)

    def test_two_atom_mean(self):
        m = moments(pq_mix())
        assert abs(m.mu[0] - (0.6 * 0.75 + 0.4 * 0.6)) < 1e-14

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        F = random_mixture(rng, max_blocks=3)
        perm = rng.permutation(F.n_atoms)
        G = MixtureOfPointMasses(F.weights[perm], F.atoms[perm])
        mf, mg = moments(F), moments(G)
        for field in ("mu", "delta", "mu_tilde", "delta_tilde"):
            assert np.allclose(getattr(mf, field), getattr(mg, field), atol=1e-13)


class TestAseRowCov:
    def test_er_dense_variance(self):
        cov = ase_row_cov(er_mix(), np.array([ER_P]), DENSE)
        assert abs(cov[0, 0] - (1 - ER_P**2)) < 1e-12

    def test_er_vanishing_variance(self):
        cov = ase_row_cov(er_mix(), np.array([ER_P]), VANISHING)
        assert abs(cov[0, 0] - 1.0) < 1e-12

    @pytest.mark.parametrize("p,q,pi1", [(0.75, 0.6, 0.6), (0.2, 0.3, 0.6), (0.5, 0.35, 0.45)])
    def test_two_block_remark_scalars(self, p, q, pi1):
        F = pq_mix(p, q, pi1)
        denom = (pi1 * p**2 + (1 - pi1) * q**2) ** 2
        s_p = (pi1 * p**4 * (1 - p**2) + (1 - pi1) * p * q**3 * (1 - p * q)) / denom
        s_q = (pi1 * p**3 * q * (1 - p * q) + (1 - pi1) * q**4 * (1 - q**2)) / denom
        assert abs(ase_row_cov(F, F.atoms[0])[0, 0] - s_p) < 1e-12
        assert abs(ase_row_cov(F, F.atoms[1])[0, 0] - s_q) < 1e-12

    def test_vanishing_minus_dense_is_psd(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            F = random_mixture(rng)
            x = F.atoms[int(rng.integers(F.n_atoms))]
            diff = ase_row_cov(F, x, VANISHING) - ase_row_cov(F, x, DENSE)
            assert np.linalg.eigvalsh(diff)[0] > -1e-10


class TestLseRowCov:
    def test_er_dense_variance(self):
        cov = lse_row_cov(er_mix(), np.array([ER_P]), DENSE)
        assert abs(cov[0, 0] - (1 - ER_P**2) / (4 * ER_P**2)) < 1e-12

    @pytest.mark.parametrize("p,q,pi1", [(0.75, 0.6, 0.6), (0.2, 0.3, 0.6), (0.5, 0.35, 0.45)])
    def test_two_block_remark_scalars(self, p, q, pi1):
        F = pq_mix(p, q, pi1)
        denom = 4 * (pi1 * p + (1 - pi1) * q) ** 3
        s_p = (pi1 * p * (1 - p**2) + (1 - pi1) * q * (1 - p * q)) / denom
        s_q = (pi1 * p * (1 - p * q) + (1 - pi1) * q * (1 - q**2)) / denom
        assert abs(lse_row_cov(F, F.atoms[0])[0, 0] - s_p) < 1e-12
        assert abs(lse_row_cov(F, F.atoms[1])[0, 0] - s_q) < 1e-12

    def test_symmetric_psd_at_atoms(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            F = random_mixture(rng)
            for regime in (DENSE, VANISHING):
                for k in range(F.n_atoms):
                    cov = lse_row_cov(F, F.atoms[k], regime)
                    assert np.max(np.abs(cov - cov.T)) < 1e-12
                    scale = max(np.abs(cov).max(), 1.0)
                    assert np.linalg.eigvalsh(cov)[0] > -1e-10 * scale

    def test_vanishing_minus_dense_is_psd(self):
        rng = np.random.default_rng(22)
        for _ in range(25):
            F = random_mixture(rng)
            x = F.atoms[int(rng.integers(F.n_atoms))]
            diff = lse_row_cov(F, x, VANISHING) - lse_row_cov(F, x, DENSE)
            assert np.linalg.eigvalsh(diff)[0] > -1e-10


class TestBlockGaussians:
    def test_er_lse_mean(self):
        n = 400
        g = sbm_block_gaussians(er_mix(), "lse", DENSE, n)
        assert len(g) == 1
        assert abs(g[0].mean[0] - 1 / np.sqrt(n)) < 1e-14

    def test_ase_means_are_atoms(self, example_mixture):
        g = sbm_block_gaussians(example_mixture, "ase", DENSE, 100)
        assert np.allclose(np.vstack([x.mean for x in g]), example_mixture.atoms)

    def test_covariance_scalings(self, example_mixture):
        g1_ase = sbm_block_gaussians(example_mixture, "ase", DENSE, 500)
        g2_ase = sbm_block_gaussians(example_mixture, "ase", DENSE, 1000)
        assert np.allclose(g1_ase[0].cov, 2 * g2_ase[0].cov)
        g1_lse = sbm_block_gaussians(example_mixture, "lse", DENSE, 500)
        g2_lse = sbm_block_gaussians(example_mixture, "lse", DENSE, 1000)
        assert np.allclose(g1_lse[0].cov, 4 * g2_lse[0].cov)

    def test_lse_means_shrink_like_sqrt_n(self, example_mixture):
        g1 = sbm_block_gaussians(example_mixture, "lse", DENSE, 400)
        g2 = sbm_block_gaussians(example_mixture, "lse", DENSE, 1600)
        assert np.allclose(np.vstack([x.mean for x in g1]), 2 * np.vstack([x.mean for x in g2]))


class TestFrobeniusLimits:
    def test_ase_er_value(self):
        assert abs(ase_frobenius_limit(er_mix(), DENSE) - (1 - ER_P**2)) < 1e-12

    def test_ase_vanishing_dominates_dense(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            F = random_mixture(rng)
            assert ase_frobenius_limit(F, VANISHING) >= ase_frobenius_limit(F, DENSE) - 1e-12

    def test_lse_er_value(self):
        expected = (1 - ER_P**2) / (4 * ER_P**2)
        assert abs(lse_frobenius_limit(er_mix(), DENSE, form="pair") - expected) < 1e-12
        assert abs(lse_frobenius_limit(er_mix(), DENSE, form="expanded") - expected) < 1e-12

    def test_lse_er_vanishing_value(self):
        assert abs(lse_frobenius_limit(er_mix(), VANISHING) - 1 / (4 * ER_P**2)) < 1e-12

    def test_dual_forms_agree_on_random_mixtures(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            F = random_mixture(rng)
            a = lse_frobenius_limit(F, DENSE, form="pair")
            b = lse_frobenius_limit(F, DENSE, form="expanded")
            assert abs(a - b) < 1e-10

    def test_frobenius_limits_equal_mean_trace_of_row_covariances(self):
        # the squared-error limits integrate the row-covariance traces
        rng = np.random.default_rng(40)
        for _ in range(20):
            F = random_mixture(rng)
            ase_total = sum(
                F.weights[k] * np.trace(ase_row_cov(F, F.atoms[k], DENSE))
                for k in range(F.n_atoms)
            )
            assert abs(ase_total - ase_frobenius_limit(F, DENSE)) < 1e-10 * max(1, ase_total)
            lse_total = sum(
                F.weights[k] * np.trace(lse_row_cov(F, F.atoms[k], DENSE))
                for k in range(F.n_atoms)
            )
            assert abs(lse_total - lse_frobenius_limit(F, DENSE)) < 1e-10 * max(1, lse_total)


class TestWithinBlockLimits:
    def test_matches_closed_form_on_invertible_models(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            K = int(rng.integers(2, 5))
            F = random_invertible_mixture(rng, K)
            B = F.atoms @ F.atoms.T
            for k in range(K):
                for method in ("ase", "lse"):
                    general = within_block_limit(F, k, method, DENSE)
                    closed = within_block_closed_form(B, F.weights, k, method)
                    assert abs(general - closed) < 1e-10 * max(1.0, abs(closed))

    def test_trace_identity_with_row_covariances(self):
        rng = np.random.default_rng(6)
        F = random_invertible_mixture(rng, 3)
        m = moments(F)
        for k in range(3):
            ase_val = within_block_limit(F, k, "ase", DENSE)
            assert abs(ase_val - np.trace(np.linalg.solve(m.delta, ase_row_cov(F, F.atoms[k])))) < 1e-9
            lse_val = within_block_limit(F, k, "lse", DENSE)
            assert abs(lse_val - np.trace(np.linalg.solve(m.delta_tilde, lse_row_cov(F, F.atoms[k])))) < 1e-9

    def test_completely_associative_ase_is_four_times_lse(self):
        B = np.diag([0.49, 0.25])
        pi = np.array([0.55, 0.45])
        F = mixture_from_block_model(BlockModelParams(B, pi), 2)
        for k in range(2):
            ratio = within_block_limit(F, k, "ase", DENSE) / within_block_limit(F, k, "lse", DENSE)
            assert abs(ratio - 4.0) < 1e-9

    def test_identity_blocks_have_zero_ase_variance(self):
        assert within_block_closed_form(np.eye(2), np.array([0.5, 0.5]), 0, "ase") == 0.0

    def test_singular_b_rejected(self):
        with pytest.raises(SingularB):
            within_block_closed_form(two_block_pq(0.5, 0.4), np.array([0.5, 0.5]), 0, "ase")

    def test_single_block_relation_to_frobenius_limit(self):
        # for one atom p the within-block limit is the Frobenius limit divided
        # by the second moment p^2 (the eigenvector rows carry a 1/S scaling)
        F = er_mix(0.6)
        within = within_block_limit(F, 0, "ase", DENSE)
        assert abs(within - ase_frobenius_limit(F, DENSE) / 0.36) < 1e-12
        closed = within_block_closed_form(np.array([[0.36]]), np.array([1.0]), 0, "ase")
        assert abs(within - closed) < 1e-12


class TestBickelSarkarCrossChecks:
    def setup_method(self):
        self.alpha, self.gamma, self.beta = 0.6, 0.3, 0.5
        self.pi = np.array([0.6, 0.4])
        self.B = np.array([[self.alpha, self.gamma], [self.gamma, self.beta]])

    def test_ase_eigenform_at_explicit_n(self):
        n = 500
        n1 = int(n * self.pi[0])
        Z = np.zeros((n, 2))
        Z[:n1, 0] = 1
        Z[n1:, 1] = 1
        P = Z @ self.B @ Z.T
        lam, vec = np.linalg.eigh(P)
        idx = np.argsort(-np.abs(lam))[:2]
        l1, l2 = lam[idx]
        v1, v2 = vec[:, idx].T
        eigen_form = (v1[0] ** 2 / l1**2 + v2[0] ** 2 / l2**2) * n1 * self.alpha * (1 - self.alpha)
        eigen_form += (v1[-1] ** 2 / l1**2 + v2[-1] ** 2 / l2**2) * (n - n1) * self.gamma * (1 - self.gamma)
        closed = within_block_closed_form(self.B, self.pi, 0, "ase")
        assert abs(n**2 * eigen_form - closed) < 1e-8

    def test_lse_variance_formula_with_eigenvalue(self):
        from rdpglimits import normalized_laplacian

        n = 500
        n1 = int(n * self.pi[0])
        Z = np.zeros((n, 2))
        Z[:n1, 0] = 1
        Z[n1:, 1] = 1
        P = Z @ self.B @ Z.T
        lam2 = np.sort(np.linalg.eigvalsh(normalized_laplacian(P)))[-2]
        mu1 = self.pi @ self.B[0]
        mu2 = self.pi @ self.B[1]
        a, g = self.alpha, self.gamma
        formula = (a * (1 - a) / mu1**2) * (0.25 + self.pi[1] * g / (mu1 * lam2**2))
        formula += (g * (1 - g) / mu1**2) * (
            self.pi[1] / (4 * self.pi[0]) + self.pi[0] * a / (mu2 * lam2**2)
        )
        closed = within_block_closed_form(self.B, self.pi, 0, "lse")
        assert abs(formula - closed) < 1e-10


class TestEmpiricalWithinBlock:
    def test_identical_rows_give_zero(self):
        rows = np.tile([0.3, 0.4], (10, 1))
        labels = np.array([1] * 5 + [2] * 5)
        assert empirical_within_block(rows, labels, 1, 1) == 0.0

    def test_rotation_invariance(self):
        rng = np.random.default_rng(7)
        rows = rng.standard_normal((40, 3))
        labels = rng.integers(1, 3, size=40)
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        a = empirical_within_block(rows, labels, 1, 2)
        b = empirical_within_block(rows @ q, labels, 1, 2)
        assert abs(a - b) < 1e-12

    def test_empty_block_rejected(self):
        rows = np.zeros((4, 2))
        labels = np.array([1, 1, 1, 1])
        with pytest.raises(EmptyBlock):
            empirical_within_block(rows, labels, 2, 1)


class TestWithinBlockSimulation:
    def test_scaled_empirical_variance_approaches_limit(self, example_model):
        # n^2 * within-block variance of the eigenvector rows settles near its
        # limit already at n = 1500 (within-graph averaging suppresses the
        # common-mode spectral noise)
        from rdpglimits import normalized_laplacian, sample_rdpg, symmetric_eig_top
        from rdpglimits.embed import BY_MAGNITUDE, BY_VALUE
        from rdpglimits.harness import replicate_seed

        F = mixture_from_block_model(example_model, 2)
        n, reps = 1500, 30
        sums = {("ase", 1): 0.0, ("ase", 2): 0.0, ("lse", 1): 0.0, ("lse", 2): 0.0}
        for rep in range(reps):
            sample = sample_rdpg(F, n, 1.0, replicate_seed(15, rep))
            A = sample.adjacency.astype(float)
            _, u_adj = symmetric_eig_top(A, 2, BY_MAGNITUDE)
            _, u_lap = symmetric_eig_top(normalized_laplacian(A), 2, BY_VALUE)
            for k in (1, 2):
                sums[("ase", k)] += n**2 * empirical_within_block(u_adj, sample.labels, k, k)
                sums[("lse", k)] += n**2 * empirical_within_block(u_lap, sample.labels, k, k)
        for (method, k), total in sums.items():
            limit = within_block_limit(F, k - 1, method, DENSE)
            assert abs(total / reps - limit) / limit < 0.15


class TestExchangeability:
    def test_limits_invariant_under_atom_permutation(self):
        rng = np.random.default_rng(8)
        F = random_invertible_mixture(rng, 3)
        perm = np.array([2, 0, 1])
        G = MixtureOfPointMasses(F.weights[perm], F.atoms[perm])
        assert abs(ase_frobenius_limit(F) - ase_frobenius_limit(G)) < 1e-11
        assert abs(lse_frobenius_limit(F) - lse_frobenius_limit(G)) < 1e-11
        for k in range(3):
            assert abs(
                within_block_limit(F, perm[k], "lse") - within_block_limit(G, k, "lse")
            ) < 1e-11
