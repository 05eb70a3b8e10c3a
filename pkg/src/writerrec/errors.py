"""Exception hierarchy.

Every error raised on bad *data* derives from :class:`DataError` so the CLI
can map it to its data-error exit code in one place.
"""


class WriterRecError(Exception):
    """Base class for all package errors."""


class DataError(WriterRecError):
    """Input data violates a documented precondition."""


class InvalidParams(WriterRecError, ValueError):
    """A parameter object fails its invariants."""


# ink-core
class MalformedLine(DataError):
    pass


class NonMonotoneTime(DataError):
    pass


class EmptyRecord(DataError):
    pass


class InconsistentPressureState(DataError):
    pass


class DegenerateGeometry(DataError):
    pass


# shared by the matchers
class DimensionMismatch(DataError):
    pass


class EmptyTrainingSet(DataError):
    pass


class TooShort(DataError):
    pass


class EmptyReferenceSet(DataError):
    pass


# matcher-atdr
class DegenerateStroke(DataError):
    pass


class CatalogueMismatch(DataError):
    pass


class NoUsableStrokes(DataError):
    pass


class WordMismatch(DataError):
    pass


class EmptyChannel(DataError):
    pass


class EmptyList(DataError):
    pass


# eval
class NoGenuine(DataError):
    pass


class NoImpostor(DataError):
    pass


class ScoringError(DataError):
    """A matcher failed on one (probe, model) pair."""

    def __init__(self, probe, model, cause):
        self.probe = probe
        self.model = model
        self.cause = cause
        super().__init__(f"scoring probe {probe!r} against model {model!r} failed: "
                         f"{type(cause).__name__}: {cause}")


# stats
class LengthMismatch(DataError):
    pass


class AllZeroDifferences(DataError):
    pass


class TooFewSamples(DataError):
    pass


class ZeroVariance(DataError):
    pass
