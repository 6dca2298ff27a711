#!/usr/bin/env python3
"""
Exception hierarchy shared by the tower modules.

Every error raised on purpose by the library derives from TowerError so
callers (and the CLI) can catch the whole family at once.
"""

from typing import Any, List


class TowerError(Exception):
    """Base exception for tower, graph and lattice errors."""
    pass


class DisconnectedGraph(TowerError):
    """Raised when an operation needs a connected graph."""
    pass


class LoopContraction(TowerError):
    """Raised when asked to contract a loop edge."""
    pass


class DisconnectedTarget(TowerError):
    """Raised when the global degree of a morphism is not defined."""
    pass


class InvalidTower(TowerError):
    """Raised when a tower or morphism fails validation."""
    pass


class UnsupportedDilatedTop(TowerError):
    """Raised when an operation needs a free double cover on top."""
    pass


class NotOrientable(TowerError):
    pass


class NotGeneric(TowerError):
    pass


class NoWitnessLabeling(TowerError):
    """Raised when a tower is not a fiberwise quotient of the trivial octuple cover."""
    pass


class TrialityFailure(TowerError):
    pass


class DilatedCover(TowerError):
    pass


class DisconnectedInput(TowerError):
    pass


class ValidationFailure(TowerError):
    """Raised when a correspondence fails to map lattices to lattices."""
    pass


class NotDivisible(TowerError):
    """Raised when a restricted correspondence has an odd coordinate.

    Attributes:
        direction: 's' for the map into the input Prym, 's^t' for the reverse
        element: coordinates of the lattice element whose image is odd
        image: coordinates of that image
    """

    def __init__(self, message: str, direction: str = 's',
                 element: List[int] = None, image: List[int] = None):
        super().__init__(message)
        self.direction = direction
        self.element = list(element or [])
        self.image = list(image or [])


class NotUnimodular(TowerError):
    pass


class NotSymmetric(TowerError, ValueError):
    """Raised when a Gram matrix differs from its transpose."""
    pass


class MalformedExpression(TowerError, ValueError):
    """Raised when text is not a linear form or a Gram matrix."""
    pass


class DimensionMismatch(TowerError):
    pass


class UnassignedVariable(TowerError):
    pass


class TowerSyntaxError(TowerError):
    """Raised by the tower file parser; carries every diagnostic found."""

    def __init__(self, message: str, diagnostics: List[Any] = None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class ConfigError(TowerError):
    """Raised when settings cannot be loaded."""
    pass
