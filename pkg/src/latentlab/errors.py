"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operands have incompatible shapes or sizes."""


class ConfigError(ValueError):
    """A configuration file or value is malformed; message names the offending key."""


class NumericalError(RuntimeError):
    """A computation produced non-finite values or otherwise failed numerically."""


class DegenerateInputError(ValueError):
    """An input set is degenerate for the requested metric (e.g. all rows identical)."""
