"""Executable lower-bound constructions for non-convex stochastic optimization."""
from ._backend import core as _core
from .chain import ChainFunction, chain_gradient, chain_value, progress, support
from .errors import DimensionError, InfeasibleInstance, UnsupportedSeed
from .harness import ExperimentManifest, fit_scaling, sweep
from .oracles import closed_form_moments
from .protocol import run, stationarity_time, zero_respecting_audit
from .solvers import SolverConfig, greedy_chain_walker, sgd, spider
from .transforms import InstanceSpec, build_instance, required_dimension

__version__ = "0.1.0"
BACKEND = _core.NAME

__all__ = [
    "BACKEND",
    "ChainFunction",
    "DimensionError",
    "ExperimentManifest",
    "InfeasibleInstance",
    "InstanceSpec",
    "SolverConfig",
    "UnsupportedSeed",
    "build_instance",
    "chain_gradient",
    "chain_value",
    "closed_form_moments",
    "fit_scaling",
    "greedy_chain_walker",
    "progress",
    "required_dimension",
    "run",
    "sgd",
    "spider",
    "stationarity_time",
    "support",
    "sweep",
    "zero_respecting_audit",
]
