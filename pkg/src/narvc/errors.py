"""Exception hierarchy shared by all narvc modules."""


class NarvcError(Exception):
    """Base class for every error raised by this package."""


class UsageError(NarvcError):
    """Caller violated an API contract (bad argument combination, wrong call order)."""


class InputError(NarvcError):
    """Invalid input data (empty clip, malformed file, inconsistent batch)."""


class DimensionError(NarvcError):
    """Tensor/array shape mismatch."""


class ConfigError(NarvcError):
    """Invalid configuration value (even kernel, unknown key, bad range)."""


class StateError(NarvcError):
    """Operation invalid in the current object state (double backward, double normalize)."""


class MaskError(NarvcError):
    """Boolean mask leaves no valid entries where at least one is required."""


class NumericsError(NarvcError):
    """A non-finite value (NaN/Inf) was produced or supplied."""
