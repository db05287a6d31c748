"""Hyperbolic chemotaxis on networks with mass-conserving node transmission."""
from .config import ScenarioConfig, apply_regime, execute, load_config
from .errors import (AssemblyError, BlowUp, ConfigError, IncompatibleGrid, NetChemoError,
                     SingularSystem, UnknownScenario)
from .hyperbolic import ArcState, aho_interior_step, check_monotonicity, from_diagonal, to_diagonal
from .network import (ArcGrid, ArcSpec, NetworkSpec, NodeSpec, build_grids, compatible_time_step,
                      make_network, uniform_xi, validate)
from .scenarios import SCENARIO_NAMES, PathVerdict, builtin_scenario, path_verdict
from .simulator import NetState, RunResult, Simulator, StepDiagnostics, trapezoidal_mass

__version__ = "0.1.0"
