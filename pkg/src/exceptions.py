class AnnealingError(Exception):
    """Base class for all errors raised by the annealing laboratory."""


class ProblemValidationError(AnnealingError, ValueError):
    """Invalid Ising problem, configuration or dimension mismatch."""


class ScheduleDomainError(AnnealingError, ValueError):
    """Schedule evaluated outside s in [0, 1] or t outside [0, t_a]."""


class EmbeddingError(AnnealingError, ValueError):
    """Flux bias too weak to pin the auxiliary qubits."""


class IntegrationError(AnnealingError, RuntimeError):
    """Norm, trace or normalization drift beyond tolerance."""


class ZeroFrequencyError(AnnealingError, ValueError):
    """A frequency table entry is zero where a logarithm of it is needed."""


class NonIdentifiableError(AnnealingError, ValueError):
    """The data carries no information about the requested parameter."""


class NoSolutionError(AnnealingError, ValueError):
    """The moment equation has no root in the admissible range."""
