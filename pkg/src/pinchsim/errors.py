"""Typed failures raised by the simulator.

Simulation-time aborts carry the offending step index and a state snapshot so
a failed run can be diagnosed from the exception alone.
"""


class PinchSimError(Exception):
    """Base class for all simulator errors."""


class QueryAmbiguous(PinchSimError):
    """Tip center is closest to a polyhedron edge/vertex, not a face interior."""


class DegenerateContacts(PinchSimError):
    """The two contact points coincide; interaction line undefined."""


class DegenerateTips(PinchSimError):
    """The two fingertip centers coincide; tip line undefined."""


class DimensionMismatch(PinchSimError):
    """Images (or arrays) with incompatible shapes."""


class DomainExceeded(PinchSimError):
    """Rolling angle left the (-pi/2, pi/2) Lyapunov domain."""


class UnknownScene(PinchSimError):
    """Requested builtin scene name does not exist."""


class ParseError(PinchSimError):
    """Config file could not be parsed."""


class ValidationError(PinchSimError):
    """Config failed schema validation; message names the field path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class SimulationAbort(PinchSimError):
    """Base for aborts raised mid-run; records where the run died."""

    def __init__(self, message, step=None, time=None, snapshot=None):
        self.step = step
        self.time = time
        self.snapshot = snapshot
        if step is not None:
            message = f"{message} (step {step}, t={time:.6f} s)"
        super().__init__(message)


class PenetrationExceeded(SimulationAbort):
    """Fingertip penetrated the object beyond the rigid-contact tolerance."""


class GraspLost(SimulationAbort):
    """A normal contact force stayed non-positive for too many steps."""


class SingularKKT(SimulationAbort):
    """Constraint rows are rank-deficient; degenerate grasp geometry."""
