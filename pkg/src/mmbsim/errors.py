"""Exception hierarchy shared by all mmbsim modules."""

from __future__ import annotations


class MmbError(Exception):
    """Base class for every error raised by mmbsim."""


class InvalidParameter(MmbError, ValueError):
    pass


class GenerationFailed(MmbError):
    pass


class PreconditionViolation(MmbError):
    pass


class ExecutionError(MmbError):
    """An automaton broke well-formedness (e.g. broadcast while busy)."""

    def __init__(self, message: str, node: int | None = None, seq: int | None = None):
        super().__init__(message)
        self.node = node
        self.seq = seq


class LivelockError(ExecutionError):
    pass


class ModelViolation(ExecutionError):
    """A standard-model automaton used an enhanced-model facility."""


class SchedulerError(MmbError):
    pass


class TraceParseError(MmbError):
    pass


class AnalysisError(MmbError):
    pass


class AdversaryError(MmbError):
    def __init__(self, message: str, round_no: int | None = None, node: int | None = None):
        super().__init__(message)
        self.round_no = round_no
        self.node = node


class StageError(MmbError):
    """Wraps a failure inside one FMMB stage, tagging which stage raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
