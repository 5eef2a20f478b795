"""Exception types shared across the package."""


class LeadrankError(Exception):
    """Base class for all package errors."""


class ConfigError(LeadrankError):
    """Invalid configuration value or combination."""


class EmptyCorpusError(LeadrankError):
    """A corpus operation was asked to produce or consume zero leads."""


class LeadNotFoundError(LeadrankError):
    """Requested lead_id is absent from the event log."""


class CorpusParseError(LeadrankError):
    """A corpus file line failed to parse.

    Carries the 1-based line number of the offending line.
    """

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DegenerateSplitError(LeadrankError):
    """A temporal split produced an empty train or test side."""


class AuditUnavailableError(LeadrankError):
    """The event-log sidecar needed by an audit is missing."""


class BudgetError(LeadrankError):
    """Token budget too small to hold the minimal sequence."""


class UnknownTokenError(LeadrankError):
    """Token id outside the vocabulary."""


class ContextLengthError(LeadrankError):
    """Input sequence longer than the model's maximum context."""


class CheckpointIntegrityError(LeadrankError):
    """Checkpoint manifest and payload disagree, or the payload is corrupt."""


class EmptyBatchError(LeadrankError):
    """A loss was requested over an empty batch."""


class NonFiniteLossError(LeadrankError):
    """Training produced a NaN or infinite loss.

    Carries the 0-based step index at which the loss diverged.
    """

    def __init__(self, step: int, message: str = ""):
        super().__init__(f"non-finite loss at step {step}" + (f": {message}" if message else ""))
        self.step = step


class UndefinedAucError(LeadrankError):
    """AUC requested for a single-class label set."""


class MisalignedCorporaError(LeadrankError):
    """Before/after corpora do not line up lead-for-lead."""


class SummarizerTransportError(LeadrankError):
    """External summarizer endpoint failed and fallback was disabled."""


class StageDependencyError(LeadrankError):
    """A pipeline stage is missing a required input file.

    Carries the path of the absent file.
    """

    def __init__(self, path: str, stage: str):
        super().__init__(f"stage '{stage}' requires missing input: {path}")
        self.path = path
        self.stage = stage
