"""Finite-volume simulator for a chemotaxis system with fast phenotype switching
and for its Keller-Segel limit."""

from .config import ConfigError, RunConfig, parse_config
from .core import DiagRecord, Field, Grid, Params, StateFull, StateLimit, StepReport, make_grid
from .full import BlowupAbort, equilibrated_full_state, exchange_relax, step_full
from .limit import step_limit
from .linsolve import SolverError
from .output import read_snapshot, write_snapshot

__all__ = [
    "BlowupAbort",
    "ConfigError",
    "DiagRecord",
    "Field",
    "Grid",
    "Params",
    "RunConfig",
    "SolverError",
    "StateFull",
    "StateLimit",
    "StepReport",
    "equilibrated_full_state",
    "exchange_relax",
    "make_grid",
    "parse_config",
    "read_snapshot",
    "step_full",
    "step_limit",
    "write_snapshot",
]
