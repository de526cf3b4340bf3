"""Exception types shared across the package."""


class StatRobustError(Exception):
    pass


class InvalidInput(StatRobustError, ValueError):
    pass


class ShapeMismatch(StatRobustError, ValueError):
    pass


class DegenerateDistribution(StatRobustError, ArithmeticError):
    """Every weight of a conditional quantized to zero."""


class InvalidState(StatRobustError, ValueError):
    pass


class InsufficientData(StatRobustError, ValueError):
    pass


class InsufficientChains(InsufficientData):
    pass


class ParseError(StatRobustError, ValueError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class Unsupported(StatRobustError, ValueError):
    pass


class ConfigError(StatRobustError, ValueError):
    pass
