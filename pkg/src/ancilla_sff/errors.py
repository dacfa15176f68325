"""Exception hierarchy shared by every module of the package."""


class AncillaSFFError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(AncillaSFFError, ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ParameterError(AncillaSFFError, ValueError):
    """A physical or run parameter is outside its allowed domain."""


class ContractViolation(AncillaSFFError, ValueError):
    """An input violates a documented precondition (e.g. non-Hermitian H)."""


class NumericalError(AncillaSFFError, ArithmeticError):
    """A decomposition failed to converge or a post-condition check failed."""


class ConfigError(AncillaSFFError, ValueError):
    """A run configuration failed validation.

    ``problems`` holds one ``(field, message)`` pair per failure so that the
    whole diagnostic can be reported at once.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = [f"{field}: {msg}" for field, msg in self.problems]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
