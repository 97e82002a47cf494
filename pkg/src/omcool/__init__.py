"""Minimum-time coupling schedules for cooling an optomechanical resonator.

Modules: ``model`` (second-moment dynamics), ``integrate`` (RK4
propagation), ``reachability`` (constant-control transfers),
``collocation`` (LGL transcription), ``nlp`` (augmented-Lagrangian solver),
``mintime`` (time search, sweeps and verification) and ``cli``.
"""

from .mintime import Report, Solution, SweepTable, min_time, sweep, verify
from .nlp import SolverOptions, solve_nlp
from .reachability import StaircaseEntry, staircase_time

__all__ = [
    "Report",
    "Solution",
    "SolverOptions",
    "StaircaseEntry",
    "SweepTable",
    "min_time",
    "solve_nlp",
    "staircase_time",
    "sweep",
    "verify",
]

__version__ = "0.1.0"
