"""Spectral simulation and verification lab for Boussinesq flow near Couette in a channel."""

from .baseflow import BaseFlow, assemble_base_flow, couette, heat_evolve
from .config import ConfigError, load_config
from .energy import FunctionalConstants, aggregate_script_energies, energy_omega_k, energy_theta_k
from .grid import ChannelGrid, make_grid
from .harness import emit_report, run_experiment
from .jk import build_jk, estimate_operator_norm
from .linear import LinearModeProblem, evolve_mode, fit_decay_rate, linear_step
from .nonlinear import FlowField, NonlinearRun, read_checkpoint, run_nonlinear, write_checkpoint
from .poisson import solve_poisson_k

__version__ = "0.1.0"

__all__ = [
    "BaseFlow", "ChannelGrid", "ConfigError", "FlowField", "FunctionalConstants",
    "LinearModeProblem", "NonlinearRun", "aggregate_script_energies", "assemble_base_flow",
    "build_jk", "couette", "emit_report", "energy_omega_k", "energy_theta_k",
    "estimate_operator_norm", "evolve_mode", "fit_decay_rate", "heat_evolve", "linear_step",
    "load_config", "make_grid", "read_checkpoint", "run_experiment", "run_nonlinear",
    "solve_poisson_k", "write_checkpoint",
]
