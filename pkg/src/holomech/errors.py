"""Exception hierarchy shared by the library and the CLI.

Every error carries a machine-readable ``code`` (written into output records)
and the process ``exit_code`` the CLI returns for it.
"""

from typing import Optional


class HolomechError(Exception):
    """Base class for all holomech failures."""

    code = "HOLOMECH_ERROR"
    exit_code = 1

    def __init__(self, message: str, key_path: Optional[str] = None):
        self.key_path = key_path
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)


class InputError(HolomechError):
    """Invalid input: malformed scenario, bad expression, wrong shapes."""

    code = "INPUT_ERROR"
    exit_code = 2


class NumericalError(HolomechError):
    """A computation could not meet its tolerance or precondition."""

    code = "NUMERICAL_ERROR"
    exit_code = 1


# ----- input errors -----

class NonHermitianInput(InputError):
    code = "NON_HERMITIAN_INPUT"


class FormatError(InputError):
    code = "FORMAT_ERROR"


class DimensionMismatch(InputError):
    code = "DIMENSION_MISMATCH"


class NonHermitianBasis(InputError):
    code = "NON_HERMITIAN_BASIS"


class GridTooCoarse(InputError):
    code = "GRID_TOO_COARSE"


class IntervalMismatch(InputError):
    code = "INTERVAL_MISMATCH"


class UnknownIdentifier(InputError):
    code = "UNKNOWN_IDENTIFIER"


class ExpressionDomainError(InputError):
    code = "EXPRESSION_DOMAIN_ERROR"


class ExpressionSyntaxError(InputError):
    """Parse failure with 1-based line/column and the tokens that would fit."""

    code = "EXPRESSION_SYNTAX_ERROR"

    def __init__(self, message: str, line: int, column: int, expected: frozenset[str]):
        self.line = line
        self.column = column
        self.expected = expected
        wanted = ", ".join(sorted(expected))
        super().__init__(f"{message} at line {line}, column {column} (expected one of: {wanted})")


# ----- numerical errors -----

class SingularInput(NumericalError):
    code = "SINGULAR_INPUT"


class StepLimitExceeded(NumericalError):
    code = "STEP_LIMIT_EXCEEDED"


class DegenerateErrorSequence(NumericalError):
    code = "DEGENERATE_ERROR_SEQUENCE"


class NonScalarHolonomy(NumericalError):
    code = "NON_SCALAR_HOLONOMY"


class EigenspaceNotPreserved(NumericalError):
    code = "EIGENSPACE_NOT_PRESERVED"


class DriftingProjectors(NumericalError):
    code = "DRIFTING_PROJECTORS"


class CheckFailed(NumericalError):
    """One or more invariant checks of the `check` command did not hold."""

    code = "CHECK_FAILED"


def exit_code_for(exc: BaseException) -> int:
    """Process exit code for an exception surfaced to the CLI (0 never)."""
    if isinstance(exc, HolomechError):
        return exc.exit_code
    return 1
