class IntensityError(Exception):
    """Base class for every failure the pipeline reports to the user."""


class CorpusParseError(IntensityError):
    """A corpus, labels or annotations line could not be parsed."""

    def __init__(self, line_number: int, message: str) -> None:
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class ValidationError(IntensityError):
    """Input parsed but breaks a domain invariant."""


class PreconditionError(IntensityError):
    """An operation was called with inputs outside its contract."""


class ClassCoverageError(PreconditionError):
    """Some intensity classes have no labeled example where one is required."""

    def __init__(self, missing_classes: list[int], context: str = "") -> None:
        self.missing_classes = sorted(missing_classes)
        where = f" in {context}" if context else ""
        super().__init__(
            f"no labeled instance of class(es) {self.missing_classes}{where}"
        )


class NumericalError(IntensityError):
    """A linear-algebra step failed (singular system, non-finite values)."""


class MissingPredictionsError(IntensityError):
    """An intensity-weighted measure was requested before `predict` ran."""
