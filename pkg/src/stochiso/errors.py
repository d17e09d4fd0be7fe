"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class StochIsoError(Exception):
    """Base class for all library errors."""

    stage = "unknown"


class ConfigError(StochIsoError, ValueError):
    """Invalid model definition, override or run option."""

    stage = "config"


class ExpressionSyntaxError(ConfigError):
    def __init__(self, message, text="", position=0):
        self.text = text
        self.position = position
        super().__init__(f"{message} at position {position}: {text!r}")


class EvaluationError(StochIsoError, ArithmeticError):
    """Unbound name or non-finite value while evaluating an expression."""

    stage = "model"


class NumericalError(StochIsoError, RuntimeError):
    """Non-convergence, failed factorization, blow-up, bad eigenvector."""

    stage = "numeric"


class ClassificationError(StochIsoError):
    """Spectrum does not have the structure of a robust oscillator."""

    stage = "classify"


class NotOscillatoryError(ClassificationError):
    pass
