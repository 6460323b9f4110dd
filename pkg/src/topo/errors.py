"""Exception types shared across the package."""


class UsageError(ValueError):
    """An operation was called in a state or with arguments it does not support."""


class ConfigError(ValueError):
    """Invalid configuration: bad file, bad value, or inconsistent settings."""


class DemoFormatError(ConfigError):
    """A demonstration file failed to parse or is unusable."""


class GenerationError(RuntimeError):
    """A scripted expert failed to produce a usable demonstration."""


class TrainingAbort(RuntimeError):
    """Training stopped because the optimization produced non-finite values."""
