"""Exceptions raised by the reach-avoid toolkit."""

from typing import Optional


class ReachAvoidError(Exception):
    """Base exception for reach-avoid toolkit errors."""

    def __init__(self, message: str, code: Optional[str] = None):
        self.message = message
        self.code = code
        super().__init__(message)


class ConfigError(ReachAvoidError, ValueError):
    """Invalid experiment configuration.

    ``field`` is the dotted path of the offending entry (``training.tau``),
    ``line`` the 1-based YAML line when the document itself is malformed.
    """

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        super().__init__(message, code="CONFIG_ERROR")

    def __str__(self) -> str:
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.field:
            where.append(f"field '{self.field}'")
        if where:
            return f"{', '.join(where)}: {self.message}"
        return self.message


class DimensionError(ReachAvoidError, ValueError):
    """State, parameter or grid shapes do not match."""

    def __init__(self, message: str):
        super().__init__(message, code="DIMENSION_ERROR")


class ActionError(ReachAvoidError, ValueError):
    """Control is not a member of the environment's control set."""

    def __init__(self, message: str):
        super().__init__(message, code="ACTION_ERROR")


class DivergenceError(ReachAvoidError):
    """Training loss blew past the divergence threshold."""

    def __init__(self, message: str, step: int = 0, loss: float = float("nan")):
        self.step = step
        self.loss = loss
        super().__init__(message, code="DIVERGENCE")


class ArtifactError(ReachAvoidError):
    """Artifact unreadable or incompatible with the configured environment."""

    def __init__(self, message: str):
        super().__init__(message, code="ARTIFACT_ERROR")
