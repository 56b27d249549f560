"""Exception hierarchy shared by all fastmm modules."""


class FastMMError(Exception):
    """Base class for library errors."""


class DimensionError(FastMMError, ValueError):
    """Operand shapes are incompatible."""


class RegimeError(FastMMError, TypeError):
    """Operands live in different scalar regimes."""


class SpecError(FastMMError, ValueError):
    """Malformed algorithm, matrix or family text."""


class InvalidAlgorithmError(FastMMError, ValueError):
    """A bilinear algorithm fails the tensor identity."""


class SingularMatrixError(FastMMError, ArithmeticError):
    """Exact or numerical singularity met during a factorization."""


class STPPViolation(FastMMError, ValueError):
    """A triple collection fails the (simultaneous) triple product property."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness
