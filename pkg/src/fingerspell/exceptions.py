"""Exception hierarchy shared across the package."""


class FingerspellError(Exception):
    """Base class for all package errors."""


class DimensionError(FingerspellError, ValueError):
    pass


class VocabularyError(FingerspellError, ValueError):
    pass


class ParameterError(FingerspellError, ValueError):
    pass


class LengthError(FingerspellError, ValueError):
    pass


class ConfigurationError(FingerspellError, ValueError):
    pass


class MaskingError(FingerspellError, ValueError):
    pass


class DegenerateBatchError(FingerspellError, ValueError):
    pass


class UndefinedMetricError(FingerspellError, ValueError):
    pass


class ParseError(FingerspellError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericError(FingerspellError, ArithmeticError):
    def __init__(self, message, checkpoint_path=None):
        if checkpoint_path is not None:
            message = f"{message} (last good checkpoint: {checkpoint_path})"
        super().__init__(message)
        self.checkpoint_path = checkpoint_path


class CorruptCheckpointError(FingerspellError, ValueError):
    def __init__(self, message, offset):
        super().__init__(f"corrupt checkpoint at byte offset {offset}: {message}")
        self.offset = offset
