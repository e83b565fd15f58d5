"""swarmsafe: deterministic formation-control simulation with a distributed
collaborative safety filter.

Pipeline per tick: sense obstacles and neighbors, assemble each agent's
high-order barrier capability system, run rounds of request/adjustment
messaging to restrict unsafe actions, pick a minimally-invasive filter
correction by quadratic program, integrate.
"""

from .model import (
    AgentState,
    ConfigurationError,
    FormationGraph,
    Gains,
    Obstacle,
    Polytope,
    Scenario,
    SpringParams,
    Vec2,
    neighbors,
    sensed_obstacles,
    validate,
)
from .scenario_io import load_scenario, reference_scenario_path

__all__ = [
    "AgentState",
    "ConfigurationError",
    "FormationGraph",
    "Gains",
    "Obstacle",
    "Polytope",
    "Scenario",
    "SpringParams",
    "Vec2",
    "neighbors",
    "sensed_obstacles",
    "validate",
    "load_scenario",
    "reference_scenario_path",
]

__version__ = "0.1.0"
