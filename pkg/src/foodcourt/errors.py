"""Exception hierarchy shared across the package."""

from __future__ import annotations


class FoodcourtError(Exception):
    """Base class for all package errors."""


class DomainError(FoodcourtError):
    """A domain value violates its invariants."""


class RosterError(FoodcourtError):
    """Roster file is structurally invalid; names the offending record."""

    def __init__(self, message: str, record: str | None = None):
        super().__init__(message if record is None else f"{record}: {message}")
        self.record = record


class ActionError(FoodcourtError):
    """A management action was rejected. Carries a machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class TemplateError(FoodcourtError):
    """Unknown template set or a template failed to render."""


class TransportError(FoodcourtError):
    """The completion transport failed permanently."""


class TransientTransportError(TransportError):
    """A retryable transport failure (timeouts, 429, 5xx)."""


class CacheMissError(FoodcourtError):
    """Replay mode found no record for a request fingerprint."""

    def __init__(self, fingerprint: str):
        super().__init__(f"no cached completion for fingerprint {fingerprint}")
        self.fingerprint = fingerprint


class CacheFormatError(FoodcourtError):
    """Completion cache file is corrupt or has an unsupported version."""


class RequestCapExceeded(FoodcourtError):
    """The per-run completion request budget was exhausted."""

    def __init__(self, cap: int):
        super().__init__(f"request cap of {cap} completions reached")
        self.cap = cap


class CheckpointError(FoodcourtError):
    """Checkpoint file is corrupt, tampered, or version-incompatible."""


class LogFormatError(FoodcourtError):
    """Run log failed to parse; names the first bad line."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ConfigError(FoodcourtError):
    """Configuration failed validation."""

    def __init__(self, findings: list[str]):
        super().__init__("; ".join(findings))
        self.findings = findings
