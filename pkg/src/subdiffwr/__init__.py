"""Waveform relaxation for optimal control of subdiffusion equations.

Dirichlet-Neumann and Neumann-Neumann waveform relaxation in one space
dimension, with L1 time stepping on uniform and graded meshes, the spectral
tools behind the convergence factors, and the theoretical error bounds.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .bounds import (
    convergence_factor_rho,
    dnwr_error_bound,
    estimate_numerical_rate,
    nnwr_error_bound,
    optimal_relaxation,
)
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .csvout import Table, emit_csv, read_csv
from .dnwr import DNWRSolver, run_dnwr, sweep_theta_dnwr
from .iteration import IterationReport
from .nnwr import NNWRSolver, run_nnwr, sweep_theta_nnwr
from .problem import ControlProblem, TabulatedTarget
from .spectral import SpectralData, SpectralError, decompose
from .subdomain import Partition, ReducedCost, TraceSet, monodomain_solve
from .timegrid import MeshKind, TimeMesh, build_mesh
from .timeop import CoupledOperator, L1Operator, assemble_l1, build_coupled
from .traceprop import dnwr_trace_step, nnwr_trace_step

__all__ = [
    "__version__",
    "ConfigError",
    "ControlProblem",
    "CoupledOperator",
    "DNWRSolver",
    "ExperimentConfig",
    "IterationReport",
    "L1Operator",
    "MeshKind",
    "NNWRSolver",
    "Partition",
    "ReducedCost",
    "SpectralData",
    "SpectralError",
    "Table",
    "TabulatedTarget",
    "TimeMesh",
    "TraceSet",
    "assemble_l1",
    "build_coupled",
    "build_mesh",
    "convergence_factor_rho",
    "decompose",
    "dnwr_error_bound",
    "dnwr_trace_step",
    "emit_csv",
    "estimate_numerical_rate",
    "load_config",
    "monodomain_solve",
    "nnwr_error_bound",
    "nnwr_trace_step",
    "optimal_relaxation",
    "parse_config",
    "read_csv",
    "run_dnwr",
    "run_nnwr",
    "sweep_theta_dnwr",
    "sweep_theta_nnwr",
]
