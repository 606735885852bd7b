"""Traffic abstraction and conflict-free scheduling of periodic event-triggered control loops."""

from .errors import (AbstractionError, ContractError, DesignError, InputError, NumericError,
                     PetcError, QueryError, SimulationError)
from .lti import PlantLoop, TimingTables, design_lqr_lyapunov, timing_tables
from .regions import RegionSpec, effective_bounds, region_of_state
from .traffic import TrafficModel, build_quotient, build_tga
from .game import EarlinessParams, GameState, build_network_tga, compose
from .synth import Strategy, solve_safety, verify_strategy
from .sim import SimConfig, conflict_scan, simulate, trace_statistics

__version__ = "0.1.0"
