"""Spectral embedding limit theory for random dot product graphs.

Sampling of point-mass-mixture RDPGs (stochastic blockmodels), adjacency and
normalized-Laplacian spectral embeddings, closed-form limit covariances of
the embedded rows, Chernoff-information comparison of the two embedding
methods, and a seeded Monte Carlo harness that checks the distributional
claims and reproduces the clustering experiments at desk scale.
"""

__version__ = "0.1.0"

from .chernoff import (
    ChernoffEval,
    RatioGridCell,
    gaussian_chernoff_divergence,
    gaussian_chernoff_information,
    rho_ase,
    rho_ase_two_block_approx,
    rho_lse,
    rho_lse_two_block_approx,
    rho_ratio_grid,
)
from .cluster import ClusteringResult, OracleRates, error_rate, gmm_em, kmeans, oracle_rates
from .embed import (
    ASE,
    BY_MAGNITUDE,
    BY_VALUE,
    LSE,
    AlignmentResult,
    Embedding,
    ase,
    lse,
    normalized_laplacian,
    procrustes_align,
    symmetric_eig_top,
    tilde_latents,
)
from .harness import (
    CltReport,
    ExperimentConfig,
    FrobeniusRow,
    ReplicationReport,
    run_clt_check,
    run_clustering_experiment,
    run_frobenius_check,
    run_section43_replication,
)
from .limits import (
    DENSE,
    VANISHING,
    GaussianParams,
    MixtureMoments,
    ase_frobenius_limit,
    ase_row_cov,
    empirical_within_block,
    lse_frobenius_limit,
    lse_row_cov,
    moments,
    sbm_block_gaussians,
    within_block_closed_form,
    within_block_limit,
)
from .model import (
    BlockModelParams,
    MixtureOfPointMasses,
    RdpgSample,
    mixture_from_block_model,
    probability_matrix,
    sample_graph,
    sample_latents,
    sample_rdpg,
)

__all__ = [name for name in dir() if not name.startswith("_")]
