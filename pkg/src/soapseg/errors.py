"""Exception taxonomy shared across the package."""


class SoapsegError(Exception):
    """Base class for all package errors."""


class CorpusError(SoapsegError):
    """Malformed or invalid corpus content (parse and validation failures)."""


class FormatError(SoapsegError):
    """Bad binary file: wrong magic, truncation, version or shape mismatch."""


class ContractViolation(SoapsegError):
    """An operation was called with arguments violating its preconditions."""


class ConfigError(SoapsegError):
    """Invalid generator or experiment configuration."""


class TrainingDiverged(SoapsegError):
    """Loss became non-finite during training."""
