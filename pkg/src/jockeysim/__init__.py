"""Two-queue jockeying simulator with a closed-form frequency model."""

from .core import (
    QUEUE_I,
    QUEUE_J,
    Job,
    PositionHistory,
    QueueState,
    RngStream,
    SimConfig,
    service_rates,
)
from .engine import SimResult, Simulation, run, run_replications

__version__ = "0.1.0"

__all__ = [
    "QUEUE_I",
    "QUEUE_J",
    "Job",
    "PositionHistory",
    "QueueState",
    "RngStream",
    "SimConfig",
    "SimResult",
    "Simulation",
    "run",
    "run_replications",
    "service_rates",
    "__version__",
]
