"""Exception hierarchy shared by the library and the command line."""


class MLSKIError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(MLSKIError, ValueError):
    """An argument is outside its admissible range."""


class BudgetExceededError(MLSKIError):
    """A grid would contain more nodes than the configured budget."""


class TableError(MLSKIError):
    """A cardinal table is missing, unusable or insufficient."""


class TableFormatError(TableError):
    """A table file is malformed (bad magic, version or length)."""


class ConfigMismatchError(TableError):
    """A table was generated for a different configuration than requested."""


class GenerationError(TableError):
    """Offline table generation did not reach the required tolerance."""


class ConditioningError(MLSKIError):
    """A dense collocation system is singular or too ill-conditioned."""
