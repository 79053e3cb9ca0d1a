"""Lagrangian node-flux model of a turbine-generator on a series-compensated network.

One differential equation covers the network, the synchronous machine and
the multi-mass shaft.  The package solves the synchronous-frame equilibrium,
linearizes and eigen-analyses it, integrates transients in the stationary or
synchronous frame, and cross-checks everything against an independent
EMTP-style companion-model solver.
"""

from .config import Scenario, SystemConfig, build, load, load_scenario
from .errors import ConfigError, DomainError, EstimationError, IntegrationError, ModelError, SolverError
from .machine import MachineParams
from .model import SystemModel
from .network import Branch, InfiniteBus, NetworkSpec
from .shaft import ShaftParams
from .sim import integrate
from .smallsignal import linearize, modal, verdict
from .steady import dispatch_torques, solve_equilibrium

__all__ = [
    "Branch", "ConfigError", "DomainError", "EstimationError", "InfiniteBus", "IntegrationError",
    "MachineParams", "ModelError", "NetworkSpec", "Scenario", "ShaftParams", "SolverError",
    "SystemConfig", "SystemModel", "build", "dispatch_torques", "integrate", "linearize", "load",
    "load_scenario", "modal", "solve_equilibrium", "verdict",
]
