from typing import Optional


class ProbKinError(Exception):
    """Base class for every error raised by probkin."""


class InvalidEvent(ProbKinError):
    pass


class InvalidMeasure(ProbKinError):
    pass


class NullNonemptyConditioner(ProbKinError):
    """Conditioning on a nonempty event of probability zero."""


class SpaceMismatch(ProbKinError):
    pass


class BudgetExceeded(ProbKinError):
    pass


class InvalidWeights(ProbKinError):
    pass


class InvalidModel(ProbKinError):
    pass


class UnknownSymbol(ProbKinError):
    pass


class DuplicateObservation(ProbKinError):
    pass


class ModelMismatch(ProbKinError):
    pass


class ShapeMismatch(ProbKinError):
    pass


class PriorNullBlock(ProbKinError):
    """The prior gives zero probability to a nonempty partition cell."""

    def __init__(self, message: str, cell: int, generator: Optional[int] = None) -> None:
        if generator is not None:
            message = f"generator {generator}: {message}"
        super().__init__(message)
        self.cell = cell
        self.generator = generator


class NullConditioner(ProbKinError):
    def __init__(self, message: str, generator: int) -> None:
        super().__init__(f"generator {generator}: {message}")
        self.generator = generator


class NullEnvelope(ProbKinError):
    pass


class EnvelopeBoundViolation(ProbKinError):
    pass


class InvalidWitness(ProbKinError):
    pass


class InvalidCoarsening(ProbKinError):
    pass


class EmptyPreimage(ProbKinError):
    pass


class ConfigError(ProbKinError):
    """Invalid session config or observation stream. Maps to exit code 1."""

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)
