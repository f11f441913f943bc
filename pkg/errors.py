#!/usr/bin/env python3
"""
Exception hierarchy shared by the confinement toolkit modules.

The batch front-end maps these onto exit codes: usage, configuration and
domain errors exit with 2, violated invariants with 1.
"""

from typing import Optional, Tuple


class ToolkitError(Exception):
    """Base class for every error raised by the toolkit."""


class HierarchyDomainError(ToolkitError, ValueError):
    """An iterated-logarithm level was evaluated outside its domain."""

    def __init__(self, level: int, s: float, edge: float):
        self.level = level
        self.s = s
        self.edge = edge
        super().__init__(
            f"iterated logarithm level {level} needs s >= {edge!r}, got s = {s!r}"
        )


class CapabilityError(ToolkitError, ValueError):
    """Requested hierarchy depth is not representable in double precision."""


class ConstructionError(ToolkitError):
    """A G-function could not be constructed with the requested guarantees."""


class IntegrationError(ToolkitError):
    """The ODE integrator failed (step-size underflow or similar)."""

    def __init__(self, message: str, location: Optional[float] = None):
        self.location = location
        if location is not None:
            message = f"{message} (at s = {location!r})"
        super().__init__(message)


class BracketError(ToolkitError):
    """No eigenvalue bracket found within the scanned energy window."""

    def __init__(self, message: str, window: Tuple[float, float]):
        self.window = window
        super().__init__(f"{message}; scanned E in [{window[0]!r}, {window[1]!r}]")


class NonMonotoneError(ToolkitError):
    """A threshold sweep saw the verdict flip back, contradicting monotonicity."""

    def __init__(self, triple):
        self.triple = triple
        rendered = ", ".join(f"{param!r}: {label}" for param, label in triple)
        super().__init__(f"non-monotone verdict sequence: {rendered}")


class DegenerateRatioError(ToolkitError, ValueError):
    """An Agmon annulus integral vanished, so the ratio is undefined."""


class InsufficientDataError(ToolkitError, ValueError):
    """Too few samples, terms or too shallow a grid for the requested fit."""


class GeometryError(ToolkitError, ValueError):
    """A point was passed that does not lie strictly inside the domain."""


class SupportError(ToolkitError, ValueError):
    """A cut-off profile is not supported strictly inside the sample grid."""


class ConfigError(ToolkitError, ValueError):
    """Run configuration failed validation; carries the JSON pointer."""

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


class ReportError(ToolkitError):
    """A report could not be produced or written."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        if path is not None:
            message = f"{message}: {path}"
        super().__init__(message)
