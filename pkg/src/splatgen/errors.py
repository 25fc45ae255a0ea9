"""Exception hierarchy shared across the package."""


class SplatgenError(Exception):
    """Base class for all errors raised by splatgen."""


class SchemaError(SplatgenError):
    """A file or config does not match its expected structure."""


class ValidationError(SplatgenError):
    """Structurally valid input carries invalid values."""


class ConfigError(SplatgenError):
    """A configuration value is out of its legal range."""


class EstimationError(SplatgenError):
    """A numerical estimation problem is underdetermined or degenerate."""
