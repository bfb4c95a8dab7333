"""Exception hierarchy shared across the toolkit.

Every error that can cross the daemon wire or the CLI boundary derives from
WattmarkError; its class name doubles as the machine-readable error code.
"""

from __future__ import annotations


class WattmarkError(Exception):
    """Base class for all toolkit errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# --- telemetry -----------------------------------------------------------

class MalformedXml(WattmarkError):
    """Driver XML document does not parse or lacks the expected root."""


class MissingField(WattmarkError):
    """A required field is absent for a requested device."""


class DeviceNotFound(WattmarkError):
    """Requested device index is beyond the attached GPU count."""


class UnitParseError(WattmarkError):
    """A value string has no parseable leading number or is out of range."""


class ToolUnavailable(WattmarkError):
    """nvidia-smi is missing from PATH or exited nonzero."""


# --- sampler -------------------------------------------------------------

class SourceInitError(WattmarkError):
    """Telemetry source could not be opened (missing tool, unreadable file)."""


class AlreadyStopped(WattmarkError):
    """stop() called on a sampler handle that was already stopped."""


# --- session -------------------------------------------------------------

class EmptyWindowWarning(UserWarning):
    """Integration window contained no samples; energy reported as 0."""


class PhaseAlreadyOpen(WattmarkError):
    """A phase is already open; phases are strictly sequential."""


class NoOpenPhase(WattmarkError):
    """end_phase called with no phase open."""


class InferenceCountMissing(WattmarkError):
    """An inference phase was closed without an inference count."""


class StoreCorrupt(WattmarkError):
    """Session store or trace file is unreadable or truncated."""


class SessionNotFound(WattmarkError):
    """Requested session id is not present in the store."""


# --- accounting ----------------------------------------------------------

class UnvalidatedSession(WattmarkError):
    """Session failed stage validation; energy composition is undefined."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class NoInferencePhase(WattmarkError):
    """Session has no completed inference phase to derive a per-call cost."""


class ZeroInferenceCount(WattmarkError):
    """Inference count is zero; per-call energy is undefined."""


class BadHeader(WattmarkError):
    """Methods table header does not match the expected columns."""


class RowParseError(WattmarkError):
    """A methods-table row failed to parse."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class RangeViolation(WattmarkError):
    """A record field is outside its allowed range."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# --- greeness ------------------------------------------------------------

class ZeroDenominator(WattmarkError):
    """Both the train cost and usage-scaled inference cost are zero."""


class DegenerateCurves(WattmarkError):
    """Two curves are identical up to scale; no unique crossover exists."""


# --- daemon --------------------------------------------------------------

class SocketBindError(WattmarkError):
    """Control socket path could not be bound."""


class SessionBusy(WattmarkError):
    """A session is already active on this daemon."""


class NoActiveSession(WattmarkError):
    """Phase or end-session request arrived with no active session."""


class ProtocolError(WattmarkError):
    """Control message could not be parsed or names an unknown op."""
