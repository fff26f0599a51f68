"""Exception types shared across the package."""


class RdpgError(Exception):
    """Base class for all package-specific errors."""


class NotPSD(RdpgError):
    """A matrix required to be positive semidefinite is not (beyond tolerance)."""


class RankMismatch(RdpgError):
    """Requested embedding dimension disagrees with the numerical rank."""


class ProbabilityOutOfRange(RdpgError):
    """An edge probability falls outside [0, 1]."""

    def __init__(self, i, j, value):
        self.i, self.j, self.value = i, j, value
        super().__init__(f"edge probability P[{i},{j}] = {value} outside [0, 1]")


class ZeroDegreeVertex(RdpgError):
    """A vertex has degree zero, so the normalized Laplacian is undefined."""

    def __init__(self, i):
        self.i = i
        super().__init__(f"vertex {i} has zero degree")


class ZeroExpectedDegree(RdpgError):
    """A row of X X^T 1 is nonpositive, so degree normalization is undefined."""

    def __init__(self, i):
        self.i = i
        super().__init__(f"row {i} has nonpositive expected degree")


class NegativeTopEigenvalue(RdpgError):
    """A top-d eigenvalue needed under a square root is negative."""

    def __init__(self, k, value):
        self.k, self.value = k, value
        super().__init__(f"eigenvalue #{k} = {value} is negative; cannot take square root")


class ConvergenceFailure(RdpgError):
    """The underlying eigensolver failed to converge."""


class NonpositiveMeanInnerProduct(RdpgError):
    """An atom has nonpositive inner product with the mixture mean."""

    def __init__(self, k):
        self.k = k
        super().__init__(f"atom {k} has nonpositive inner product with the mean")


class SingularDelta(RdpgError):
    """The latent second-moment matrix is singular."""


class SingularB(RdpgError):
    """The block probability matrix is singular where invertibility is required."""


class InvalidT(RdpgError):
    """Chernoff divergence parameter t outside the open interval (0, 1)."""


class EmptyBlock(RdpgError):
    """A block referenced by index contains no vertices."""

    def __init__(self, k):
        self.k = k
        super().__init__(f"block {k} is empty")


class DegeneratePoints(RdpgError):
    """Fewer distinct points than requested clusters."""


class CovarianceCollapse(RdpgError):
    """A mixture component covariance is not positive definite even after ridging."""


class TooManyBlocks(RdpgError):
    """Label matching by permutation enumeration is capped at K <= 10."""


class ConfigError(RdpgError):
    """Invalid experiment or CLI configuration; message names the field."""
