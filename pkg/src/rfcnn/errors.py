"""Exception types shared across the package."""


class RFCNNError(Exception):
    pass


class DimensionError(RFCNNError, ValueError):
    pass


class NumericError(RFCNNError, ArithmeticError):
    pass


class StateError(RFCNNError, RuntimeError):
    pass


class ConfigError(RFCNNError, ValueError):
    pass


class DegenerateRoIError(RFCNNError, ValueError):
    pass


class NoDetectionError(RFCNNError):
    pass


class TrainingError(RFCNNError, RuntimeError):
    """Non-finite loss during training; ``step`` is the failing iteration."""

    def __init__(self, message, step=None, stage=None):
        super().__init__(message)
        self.step = step
        self.stage = stage


class FormatError(RFCNNError, ValueError):
    """Malformed on-disk data; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
