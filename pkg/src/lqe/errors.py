"""Exception hierarchy shared by every lqe module."""


class LqeError(Exception):
    """Base class for all errors raised by lqe."""


class ValidationError(LqeError, ValueError):
    """Input violates a documented precondition."""


class SchemaError(ValidationError):
    """A CSV header is missing a required column."""

    def __init__(self, column: str):
        super().__init__(f"missing required column {column!r}")
        self.column = column


class ParseError(ValidationError):
    """A data row could not be parsed."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ModelFormatError(LqeError):
    """A serialized model stream is malformed, truncated or of the wrong version."""


class TrainingError(LqeError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message if epoch is None else f"epoch {epoch}: {message}")
        self.epoch = epoch
