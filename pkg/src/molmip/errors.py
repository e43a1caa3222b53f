"""Exception types shared across the package."""


class MolMipError(Exception):
    """Base class for errors raised by this package."""


class SchemaError(MolMipError):
    """A document (weight file, design space, MPS file) failed to parse or validate."""


class UnsupportedOperationError(MolMipError):
    """The requested (operation, graph mode) pair has no linear encoding."""


class ValidationError(MolMipError):
    """A decoded solution violates the constraint system it came from."""
