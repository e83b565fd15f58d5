"""Virtual mass-spring formation controller and the induced closed-loop fields.

The per-agent dynamics are a planar double integrator

    xdot_i = [v_i, u_i^f(x) - u_i^s]

where u_i^f is the mass-spring formation acceleration (plus an optional
constant leader input) and u_i^s is the safety-filter correction.  Besides the
controller itself this module provides its Jacobians with respect to the
positions and velocities involved, which the barrier module chains into
closed-form Lie derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import FormationGraph, Vec2

COINCIDENCE_EPS = 1e-9  # m; below this the spring direction is ill-conditioned

# Constant actuation matrix of the filtered dynamics: zeros over -identity.
GBAR = np.array([[0.0, 0.0], [0.0, 0.0], [-1.0, 0.0], [0.0, -1.0]])


class CoincidentAgentsError(RuntimeError):
    """Two spring-coupled agents are (numerically) on top of each other."""

    def __init__(self, i: int, j: int):
        super().__init__(f"agents {i} and {j} coincide; spring direction undefined")
        self.pair = (i, j)


@dataclass
class FormationParams:
    """Everything needed to evaluate the nominal controller of any agent."""

    graph: FormationGraph
    masses: list[float]
    spring_sign: str = "restoring"
    leader_inputs: dict[int, Vec2] = field(default_factory=dict)

    @property
    def sign(self) -> float:
        return -1.0 if self.spring_sign == "restoring" else 1.0

    def damping_total(self, i: int) -> float:
        return sum(self.graph.spring(i, j).damping for j in self.graph.neighbors(i))


def spring_control(
    states: np.ndarray,
    graph: FormationGraph,
    i: int,
    mass: float,
    spring_sign: str = "restoring",
) -> np.ndarray:
    """Mass-spring formation acceleration for agent ``i``.

    (1/m) * sum_j [sigma * k_ij * s_ij * (p_i - p_j)/L_ij - b_ij * v_i]
    with stretch s_ij = L_ij - R_ij.  ``sigma`` is +1 for ``paper_literal``
    and -1 (restoring) by default.
    """
    states = np.asarray(states, dtype=float)
    sigma = -1.0 if spring_sign == "restoring" else 1.0
    p_i = states[i, :2]
    v_i = states[i, 2:]
    acc = np.zeros(2)
    for j in graph.neighbors(i):
        sp = graph.spring(i, j)
        e = p_i - states[j, :2]
        length = float(np.linalg.norm(e))
        if length < COINCIDENCE_EPS:
            raise CoincidentAgentsError(i, j)
        stretch = length - sp.rest_length
        acc += sigma * sp.stiffness * stretch * e / length
        acc -= sp.damping * v_i
    return acc / mass


def nominal_control(states: np.ndarray, params: FormationParams, i: int) -> np.ndarray:
    """Formation acceleration plus the agent's constant leader input, if any."""
    u = spring_control(states, params.graph, i, params.masses[i], params.spring_sign)
    leader = params.leader_inputs.get(i)
    if leader is not None:
        u = u + leader.as_array()
    return u


def closed_loop_drift(states: np.ndarray, graph_or_params, i: int, params=None) -> np.ndarray:
    """Drift xdot_i = [v_i, u_i^f] of agent ``i`` with the filter off.

    Accepts either (states, params, i) or the spelled-out
    (states, graph, i, params) form; the latter keeps call sites readable
    when graph and params travel separately.
    """
    if params is None:
        params = graph_or_params
    states = np.asarray(states, dtype=float)
    return np.concatenate([states[i, 2:], nominal_control(states, params, i)])


def apply_filter(u_f: np.ndarray, u_s: np.ndarray) -> np.ndarray:
    """Applied acceleration u_f - u_s."""
    return np.asarray(u_f, dtype=float) - np.asarray(u_s, dtype=float)


def _spring_block(e: np.ndarray, length: float, sp) -> np.ndarray:
    """d/dp_i of k*(1 - R/L)*e for one spring, e = p_i - p_j."""
    eye = np.eye(2)
    return sp.stiffness * ((1.0 - sp.rest_length / length) * eye
                           + sp.rest_length / length**3 * np.outer(e, e))


def control_jac_pos(
    states: np.ndarray, params: FormationParams, i: int, m: int
) -> np.ndarray:
    """Jacobian of u_i^f with respect to the position of agent ``m`` (2x2)."""
    states = np.asarray(states, dtype=float)
    graph = params.graph
    nbrs = graph.neighbors(i)
    if m != i and m not in nbrs:
        return np.zeros((2, 2))
    sigma = params.sign
    mass = params.masses[i]
    if m == i:
        J = np.zeros((2, 2))
        for j in nbrs:
            sp = graph.spring(i, j)
            e = states[i, :2] - states[j, :2]
            length = float(np.linalg.norm(e))
            if length < COINCIDENCE_EPS:
                raise CoincidentAgentsError(i, j)
            J += _spring_block(e, length, sp)
        return sigma * J / mass
    sp = graph.spring(i, m)
    e = states[i, :2] - states[m, :2]
    length = float(np.linalg.norm(e))
    if length < COINCIDENCE_EPS:
        raise CoincidentAgentsError(i, m)
    return -sigma * _spring_block(e, length, sp) / mass


def control_jac_vel(states: np.ndarray, params: FormationParams, i: int, m: int) -> np.ndarray:
    """Jacobian of u_i^f with respect to the velocity of agent ``m`` (2x2)."""
    if m != i:
        return np.zeros((2, 2))
    return -(params.damping_total(i) / params.masses[i]) * np.eye(2)
