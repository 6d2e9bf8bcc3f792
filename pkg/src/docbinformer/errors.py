"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit 2,
data problems exit 3, numerical or checkpoint problems exit 4.
"""


class DocBinFormerError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(DocBinFormerError, ValueError):
    """Array dimensions do not satisfy an operation's contract."""


class ConfigError(DocBinFormerError, ValueError):
    """A configuration value or key is invalid."""


class DataError(DocBinFormerError, ValueError):
    """Input data is missing, malformed, or inconsistent."""


class CheckpointError(DocBinFormerError, ValueError):
    """A checkpoint file is malformed, truncated, or incompatible."""


class NumericsError(DocBinFormerError, ArithmeticError):
    """A computation produced NaN or Inf from finite inputs."""
