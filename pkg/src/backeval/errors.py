"""Exception types shared across the package.

Both error classes subclass ValueError so library callers can catch broadly;
the CLI maps them to distinct exit codes (manifest problems vs. bad data).
"""


class ManifestError(ValueError):
    """Invalid manifest, config, or argument combination."""


class DataError(ValueError):
    """Invalid data: bad values, mismatched shapes, degenerate inputs."""


class FormatError(DataError):
    """Malformed or truncated on-disk file."""
