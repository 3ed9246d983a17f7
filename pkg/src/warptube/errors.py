"""Exception types shared across the package."""

from __future__ import annotations


class WarptubeError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(WarptubeError):
    """Argument outside a profile's admissible range."""


class UnsupportedOrderError(WarptubeError):
    """Derivative order beyond analytic_order + 2."""


class RootNotFoundError(WarptubeError):
    """No sign change on the root-search bracket."""


class EvaluationError(WarptubeError):
    """Non-finite integrand sample where a finite value is required."""


class NumericalIntegrationError(WarptubeError):
    """Adaptive quadrature failed to converge on a finite window."""


class DegenerateChartError(WarptubeError):
    """The change of coordinates degenerates (C <= 0) at the evaluation point."""


class CalibrationError(WarptubeError):
    """A calibration ratio is unbounded, signalling a hypothesis violation."""


class SimulationFault(WarptubeError):
    """Non-finite path state; carries the path index and time."""

    def __init__(self, message: str, path_index: int, t: float):
        super().__init__(f"{message} (path {path_index}, t={t:.6g})")
        self.path_index = path_index
        self.t = t


class InconclusiveStatisticsError(WarptubeError):
    """Every path was censored; no exit statistics available."""


class ConfigError(WarptubeError):
    """Invalid run configuration; carries a human-addressable location."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(message if location is None else f"{location}: {message}")
