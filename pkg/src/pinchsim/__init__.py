"""Simulator for tactile-informed two-fingered pinch grasping with rolling."""

from .errors import (
    DegenerateContacts,
    DegenerateTips,
    DimensionMismatch,
    DomainExceeded,
    GraspLost,
    ParseError,
    PenetrationExceeded,
    PinchSimError,
    QueryAmbiguous,
    SimulationAbort,
    SingularKKT,
    UnknownScene,
    ValidationError,
)
from .scenario import RunSummary, ScenarioConfig, builtin_scene, load_config, run

__version__ = "1.0.0"

__all__ = [
    "builtin_scene",
    "load_config",
    "run",
    "RunSummary",
    "ScenarioConfig",
    "PinchSimError",
    "QueryAmbiguous",
    "DegenerateContacts",
    "DegenerateTips",
    "DimensionMismatch",
    "DomainExceeded",
    "UnknownScene",
    "ParseError",
    "ValidationError",
    "SimulationAbort",
    "PenetrationExceeded",
    "GraspLost",
    "SingularKKT",
    "__version__",
]
