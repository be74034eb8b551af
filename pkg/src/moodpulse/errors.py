class MoodpulseError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(MoodpulseError):
    pass


class MalformedRecordError(MoodpulseError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class LabelConflictError(MoodpulseError):
    pass


class RankDeficientError(MoodpulseError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; collinear columns: {self.columns}")


class InsufficientDataError(MoodpulseError):
    pass


class StageError(MoodpulseError):
    """A pipeline stage failed; carries the stage name for exit-code mapping."""

    def __init__(self, stage: str, cause: BaseException | str):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")
