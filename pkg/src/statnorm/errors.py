"""Exception hierarchy shared by every module.

Each class carries an ``exit_code`` so the command line can map failures to a
category without string matching.
"""


class StatnormError(Exception):
    exit_code = 1


class InvalidArgumentError(StatnormError, ValueError):
    exit_code = 2


class UnknownActivationError(InvalidArgumentError, KeyError):
    def __init__(self, name, valid):
        self.name = name
        self.valid = tuple(valid)
        super().__init__(f"unknown activation {name!r}; valid names: {', '.join(self.valid)}")

    def __str__(self):
        return self.args[0]


class ConfigError(InvalidArgumentError):
    """Configuration failed validation; ``field`` names the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericDomainError(StatnormError, ArithmeticError):
    exit_code = 3


class DegenerateError(NumericDomainError):
    """Raised for affine activations and other rank-deficient inputs."""


class ConvergenceError(NumericDomainError):
    pass


class DivergenceError(NumericDomainError):
    def __init__(self, message, layer=None):
        self.layer = layer
        super().__init__(message)


class CapacityError(StatnormError):
    exit_code = 5


class FormatError(StatnormError):
    exit_code = 4

    def __init__(self, message, offset=None):
        self.offset = offset
        super().__init__(message)


class FilesystemError(StatnormError, OSError):
    exit_code = 4
