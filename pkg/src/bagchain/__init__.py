"""Discrete-round simulator of a blockchain whose proof of work doubles as
distributed ensemble training: miners submit bagged base models, aggregate
them into candidate ensembles, and commit the best one per height."""

from .chain import (
    BlockStore,
    EnsembleBlock,
    KeyBlock,
    LearnerSpec,
    MiniBlock,
    ProtocolError,
    Task,
    make_genesis,
)
from .harness import Scenario, Simulation, SimulationResult, load_scenario, run_scenario
from .metrics import MetricValue

__all__ = [
    "BlockStore",
    "EnsembleBlock",
    "KeyBlock",
    "LearnerSpec",
    "MiniBlock",
    "ProtocolError",
    "Task",
    "make_genesis",
    "Scenario",
    "Simulation",
    "SimulationResult",
    "load_scenario",
    "run_scenario",
    "MetricValue",
]

__version__ = "0.1.0"
