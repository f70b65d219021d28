"""Exception hierarchy shared across the package."""


class McsenseError(Exception):
    """Base class for all errors raised by mcsense."""


class ParameterError(McsenseError):
    """Invalid argument or distribution/design parameter."""


class ConfigError(McsenseError):
    """Malformed or inconsistent run configuration."""


class NotPositiveDefiniteError(McsenseError):
    """Correlation target is not positive definite.

    ``order`` is the size of the smallest leading principal minor that fails.
    """

    def __init__(self, order: int):
        self.order = order
        super().__init__(
            f"correlation target is not positive definite "
            f"(leading {order}x{order} minor is not positive)"
        )


class CollinearityError(McsenseError):
    """Regression design matrix is (numerically) rank deficient.

    ``columns`` lists the 0-based indices of the dependent columns.
    """

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(
            f"collinear regressor columns: {self.columns}"
        )


class FormulaError(McsenseError):
    """Formula text could not be parsed.

    ``position`` is the 0-based character offset of the offending token.
    """

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (at offset {position})")


class EvalFault(McsenseError):
    """A model evaluation hit a math fault (division by zero, log of a
    nonpositive value, ...). ``subexpr`` is the failing subexpression text;
    ``row`` is filled in by the caller when known."""

    def __init__(self, message: str, subexpr: str = "", row: int | None = None):
        self.subexpr = subexpr
        self.row = row
        where = f" in '{subexpr}'" if subexpr else ""
        at = f" (row {row})" if row is not None else ""
        super().__init__(f"{message}{where}{at}")


class FileFormatError(McsenseError):
    """A sample or output file violates its format contract.

    ``line`` is the 1-based line number when applicable.
    """

    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        loc = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(f"{loc}{message}")


class ExternalModelError(McsenseError):
    """External model invocation failed (spawn, exit status, timeout or
    malformed output)."""

    def __init__(self, message: str, exit_code: int | None = None, stderr: str = ""):
        self.exit_code = exit_code
        self.stderr = stderr
        tail = ""
        if exit_code is not None:
            tail += f" (exit code {exit_code})"
        if stderr:
            tail += f"\nstderr: {stderr.strip()}"
        super().__init__(f"{message}{tail}")


class DesignMismatchError(McsenseError):
    """The requested analysis does not match the sample's design."""


class UnsupportedModelError(McsenseError):
    """Reference indices requested for a model without a closed form."""
