"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class JNNTsError(Exception):
    exit_code = 1
    code = "error"


class InputError(JNNTsError, ValueError):
    """Bad or inconsistent input data."""

    exit_code = 2
    code = "input_error"


class DiagnosticError(InputError):
    """A diagnostic was requested on a chain that cannot support it."""

    code = "diagnostic_error"


class ConfigurationError(JNNTsError, ValueError):
    exit_code = 3
    code = "configuration_error"


class NumericalError(JNNTsError, ArithmeticError):
    exit_code = 4
    code = "numerical_error"


class ConvergenceError(JNNTsError):
    """Raised in strict mode when a Gelman-Rubin statistic exceeds its threshold."""

    exit_code = 5
    code = "non_convergence"
