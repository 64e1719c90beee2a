"""Reallocating in-service vehicles to bridge rail disruptions."""
from .kernels import BACKEND
from .model import (CostParams, DisruptionSpec, ModeKind, ScenarioModel, load_scenario,
                    dump_scenario, validate)
from .network import apply_disruption, candidate_vehicles, stranded_volumes
from .optimizer import ReallocationPlan, SolveReport, induced_xi, lower_bound, solve
from .synth import synth_corridor

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CostParams", "DisruptionSpec", "ModeKind", "ScenarioModel", "load_scenario",
    "dump_scenario", "validate", "apply_disruption", "candidate_vehicles", "stranded_volumes",
    "ReallocationPlan", "SolveReport", "induced_xi", "lower_bound", "solve", "synth_corridor",
]
