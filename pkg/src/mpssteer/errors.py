"""Exception types shared across the package."""


class MpsSteerError(Exception):
    """Base class for all package-specific errors."""


class DegenerateSpectrum(MpsSteerError):
    """Dominant eigenvalue is not unique in modulus."""


class SingularComplement(MpsSteerError):
    """(1 - QMQ) is singular on the complement of the dominant subspace."""


class SizeLimit(MpsSteerError):
    """Requested dense realization exceeds the supported chain length."""


class SingularPoint(MpsSteerError):
    """Manifold parameters hit the excluded singular point."""


class IllConditionedTangent(MpsSteerError):
    """Tangent-space Gram matrix is too ill-conditioned to invert."""


class ParentUndefined(MpsSteerError):
    """Parent-Hamiltonian couplings diverge or vanish at this point."""


class DimensionMismatch(MpsSteerError):
    """Operator/tensor dimensions are incompatible."""


class ZeroTangent(MpsSteerError):
    """Rescaled leakage requested for a vanishing tangent vector."""


class OrthogonalSubspaces(MpsSteerError):
    """Control span is orthogonal to the requested direction."""


class TruncationOverflow(MpsSteerError):
    """Discarded Schmidt weight in a single step exceeded the allowed bound."""


class ConfigError(MpsSteerError):
    """Invalid experiment configuration."""
