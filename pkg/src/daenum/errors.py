"""Exception types raised across the package."""


class DesignError(ValueError):
    """Base class for all errors raised by daenum."""


class RunSizeResidueError(DesignError):
    """Run size has the wrong residue modulo 4 for the requested operation."""


class SpecShapeError(DesignError):
    """A FormSpec does not fit the number of factors of a design."""


class FormError(DesignError):
    """A design does not have the optimal information-matrix form required."""


class ShapeError(DesignError):
    """Designs (or operations) with incompatible dimensions."""


class OrderError(DesignError):
    """Interaction order out of range."""


class SingularModelError(DesignError):
    """The main-effects model matrix is rank deficient."""


class OracleScaleError(DesignError):
    """Instance too large for a brute-force oracle."""


class VersionError(DesignError):
    """Catalog schema or canonicalization scheme mismatch."""


class ParseError(DesignError):
    """Malformed catalog file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingDataError(DesignError):
    """Catalog files or characterization data not found."""
