"""Exception hierarchy shared by every pipeline stage."""

from __future__ import annotations


class HybridRagError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(HybridRagError, ValueError):
    """A line-delimited record could not be parsed."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where = f"{where}{line}: " if where else f"line {line}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")


class IntegrityError(HybridRagError):
    """Records are individually valid but inconsistent as a set (e.g. duplicate ids)."""


class ValidationError(HybridRagError, ValueError):
    """A record violates the configured schema or taxonomy."""


class BuildError(HybridRagError):
    """An index could not be built from its inputs."""


class ChunkLookupError(HybridRagError, LookupError):
    """An identifier is not present in the structure being queried."""

    def __str__(self) -> str:  # LookupError/KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


class DomainError(HybridRagError, ValueError):
    """A numeric input is outside the domain of the operation."""


class ServiceError(HybridRagError):
    """An external model or service binding failed.

    ``context`` names the unit of work (chunk id, question id) being processed.
    """

    def __init__(self, message: str, context: str | None = None):
        self.context = context
        super().__init__(f"{context}: {message}" if context else message)


class GenerationTimeoutError(ServiceError, TimeoutError):
    def __init__(self, elapsed: float, context: str | None = None):
        self.elapsed = elapsed
        super().__init__(f"generation timed out after {elapsed:.3f}s", context)


class CompletenessError(HybridRagError):
    """Evaluation inputs do not cover every question."""

    def __init__(self, message: str, missing: list[str]):
        self.missing = list(missing)
        super().__init__(f"{message}: {', '.join(self.missing)}")


class ConfigError(HybridRagError, ValueError):
    """The pipeline configuration is invalid or references missing inputs."""


class MissingArtifactError(HybridRagError, FileNotFoundError):
    """A stage was run before the stage that produces its inputs."""
