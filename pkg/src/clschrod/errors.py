"""Exception hierarchy.

Numerical failures (caustics, blowups) share a base class so the CLI can map
them to a single exit code.
"""

from __future__ import annotations


class SimulationError(Exception):
    """Base class for every error raised by this package."""


class AllZeroField(SimulationError, ValueError):
    pass


class LoopThroughNode(SimulationError, ValueError):
    pass


class NonPeriodicGrid(SimulationError, ValueError):
    pass


class PreconditionError(SimulationError, ValueError):
    pass


class NumericalFailure(SimulationError):
    """Evolution cannot continue; ``t`` is the simulation time of failure."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class CausticDetected(NumericalFailure):
    def __init__(self, report, t: float | None = None):
        super().__init__(
            f"caustic at t={report.t:.6g} ({report.metric}={report.value:.3g} at {report.location})",
            t=report.t if t is None else t,
        )
        self.report = report


class NumericalBlowup(NumericalFailure):
    pass


class ZeroDensity(SimulationError, ValueError):
    pass


class NodeRegion(SimulationError, ValueError):
    pass


class LeftDomain(SimulationError, ValueError):
    pass


class InsufficientSnapshots(SimulationError, ValueError):
    pass


class NodeInSuperposition(SimulationError, ValueError):
    pass


class ZeroNorm(SimulationError, ValueError):
    pass


class ZeroOverlap(SimulationError, ValueError):
    pass


class DegenerateInterval(SimulationError, ValueError):
    pass


class BasisViolation(SimulationError, ValueError):
    """Raised for invalid positive bases; ``result`` holds (pure, mixed, difference)."""

    def __init__(self, message: str, result: tuple[float, float, float] | None = None):
        super().__init__(message)
        self.result = result


class ParseError(SimulationError):
    pass


class ConfigValidationError(SimulationError):
    """Carries every validation problem found, as ``(field_path, message)`` pairs."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = list(errors)
        lines = "; ".join(f"{path}: {msg}" for path, msg in self.errors)
        super().__init__(f"{len(self.errors)} config error(s): {lines}")
