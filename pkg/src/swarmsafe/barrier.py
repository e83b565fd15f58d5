"""Distance barrier, its high-order ladder, and the per-agent capability system.

The barrier candidate for agent i against obstacle o is

    h = ||p_i - p_o||^2 - r^2

with first ladder step phi1 = hdot + alpha0*h.  Control enters in the second
derivative, so the safety condition couples phi1's Lie derivatives along the
closed-loop formation drift with the (constant) actuation matrix.  Everything
here is closed-form: the gradients of L_f phi1 are chained from the spring
controller Jacobians in :mod:`swarmsafe.formation`, and the test suite checks
each expression against central-difference oracles.

Sign conventions: ``lie_g_phi1`` returns the velocity gradient row
2*(p_i - p_o); the actuation matrix carries -identity on the acceleration
rows, so every place a control multiplies that row uses the negated value
(``first_order_constraint`` and the assembled B matrix do this fold).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formation import FormationParams, control_jac_pos, control_jac_vel, nominal_control
from .model import Gains, Obstacle


def h(agent_state: np.ndarray, obs: Obstacle) -> float:
    """Squared clearance ||p_i - p_o||^2 - r^2 (m^2); >= 0 is safe."""
    p = np.asarray(agent_state, dtype=float)[:2]
    e = p - obs.position.as_array()
    return float(e @ e - obs.radius_margin**2)


def phi1(agent_state: np.ndarray, obs: Obstacle, alpha0: float) -> float:
    """First ladder function hdot + alpha0*h, with obstacle velocity included."""
    x = np.asarray(agent_state, dtype=float)
    e = x[:2] - obs.position.as_array()
    w = x[2:] - obs.velocity.as_array()
    return float(2.0 * w @ e + alpha0 * (e @ e - obs.radius_margin**2))


def lie_g_phi1(agent_state: np.ndarray, obs: Obstacle) -> np.ndarray:
    """Velocity-gradient row 2*(p_i - p_o) of phi1.

    The actuation fold (-identity) is applied by consumers; see module notes.
    """
    p = np.asarray(agent_state, dtype=float)[:2]
    return 2.0 * (p - obs.position.as_array())


def _obstacle_accel(states: np.ndarray, params: FormationParams, obs: Obstacle) -> np.ndarray:
    if obs.agent_index is None:
        return np.zeros(2)
    return nominal_control(states, params, obs.agent_index)


def lie_f_phi1(
    states: np.ndarray, i: int, obs: Obstacle, gains: Gains, params: FormationParams
) -> float:
    """Lie derivative of phi1 along the closed-loop drift (u_s = 0 everywhere).

    2 * [(u_i^f - a_o) . e + |w|^2 + alpha0 * e . w], where a_o is the
    obstacle's acceleration (its own formation control when the obstacle is
    another agent, zero otherwise).
    """
    states = np.asarray(states, dtype=float)
    e = states[i, :2] - obs.position.as_array()
    w = states[i, 2:] - obs.velocity.as_array()
    u_f = nominal_control(states, params, i)
    a_o = _obstacle_accel(states, params, obs)
    return float(2.0 * ((u_f - a_o) @ e + w @ w + gains.alpha0 * (e @ w)))


def _lie_f_phi1_gradients(
    states: np.ndarray, i: int, obs: Obstacle, gains: Gains, params: FormationParams
):
    """Per-agent gradients of L_f phi1 plus the static-obstacle block gradient.

    Returns (dp, dv, obs_block) where dp/dv map agent index -> 2-vector and
    obs_block is (d/dp_o, d/dv_o) for a non-agent obstacle (None otherwise).
    """
    states = np.asarray(states, dtype=float)
    e = states[i, :2] - obs.position.as_array()
    w = states[i, 2:] - obs.velocity.as_array()
    u_f = nominal_control(states, params, i)
    a_o = _obstacle_accel(states, params, obs)
    rel_acc = u_f - a_o
    o_idx = obs.agent_index

    deps = {i, *params.graph.neighbors(i)}
    if o_idx is not None:
        deps |= {o_idx, *params.graph.neighbors(o_idx)}

    dp: dict[int, np.ndarray] = {}
    dv: dict[int, np.ndarray] = {}
    for m in sorted(deps):
        gp = 2.0 * (control_jac_pos(states, params, i, m).T @ e)
        gv = 2.0 * (control_jac_vel(states, params, i, m).T @ e)
        if o_idx is not None:
            gp -= 2.0 * (control_jac_pos(states, params, o_idx, m).T @ e)
            gv -= 2.0 * (control_jac_vel(states, params, o_idx, m).T @ e)
        if m == i:
            gp += 2.0 * (rel_acc + gains.alpha0 * w)
            gv += 2.0 * (2.0 * w + gains.alpha0 * e)
        if m == o_idx:
            gp -= 2.0 * (rel_acc + gains.alpha0 * w)
            gv -= 2.0 * (2.0 * w + gains.alpha0 * e)
        dp[m] = gp
        dv[m] = gv

    obs_block = None
    if o_idx is None:
        obs_block = (
            -2.0 * (rel_acc + gains.alpha0 * w),
            -2.0 * (2.0 * w + gains.alpha0 * e),
        )
    return dp, dv, obs_block


def first_order_constraint(
    states: np.ndarray, i: int, obs: Obstacle, gains: Gains, params: FormationParams
) -> tuple[np.ndarray, float]:
    """Halfspace (c, d) with c . u_s >= d enforcing phi1dot + alpha1*phi1 >= 0."""
    states = np.asarray(states, dtype=float)
    c = -lie_g_phi1(states[i], obs)
    d = -(lie_f_phi1(states, i, obs, gains, params)
          + gains.alpha1 * phi1(states[i], obs, gains.alpha0))
    return c, float(d)


@dataclass
class SafetyRow:
    """One obstacle's affine capability row: Phi = sum_j a_ij.u_j + b.u_i + q."""

    obstacle_id: str
    a: dict[int, np.ndarray]  # neighbor index -> velocity-space 2-vector
    b_row: np.ndarray
    q_entry: float
    h_value: float
    phi1_value: float


@dataclass
class SafetySystem:
    """Stacked capability rows for one agent over its sensed obstacles."""

    agent: int
    neighbor_order: list[int]
    rows: list[SafetyRow]

    @property
    def K(self) -> int:
        return len(self.rows)

    @property
    def A(self) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, 2 * len(self.neighbor_order)))
        return np.array(
            [np.concatenate([row.a[j] for j in self.neighbor_order])
             if self.neighbor_order else np.zeros(0)
             for row in self.rows]
        ).reshape(self.K, 2 * len(self.neighbor_order))

    @property
    def B(self) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, 2))
        return np.vstack([row.b_row for row in self.rows])

    @property
    def q(self) -> np.ndarray:
        return np.array([row.q_entry for row in self.rows])

    def evaluate(self, u_neighbors: dict[int, np.ndarray], u_own: np.ndarray) -> np.ndarray:
        """Phi vector at the given (velocity-space neighbor, own accel) controls."""
        out = self.q + self.B @ np.asarray(u_own, dtype=float)
        for j in self.neighbor_order:
            u_j = np.asarray(u_neighbors.get(j, np.zeros(2)), dtype=float)
            out = out + np.array([row.a[j] @ u_j for row in self.rows])
        return out


def assemble(
    states: np.ndarray,
    i: int,
    sensed: list[Obstacle],
    gains: Gains,
    params: FormationParams,
) -> SafetySystem:
    """Build the capability system (A_i, B_i, q_i) of agent ``i``.

    Row-by-row: the own-control coefficient folds the actuation sign into the
    velocity gradient of phi1; neighbor coefficients are taken against virtual
    velocity-space control (the acceleration-level effect is identically zero
    for this drift), with an extra alpha1 term on rows whose obstacle is the
    neighbor itself, since phi1 then depends on that neighbor's position.
    """
    states = np.asarray(states, dtype=float)
    graph = params.graph
    nbrs = graph.neighbors(i)
    rows: list[SafetyRow] = []
    for obs in sensed:
        e = states[i, :2] - obs.position.as_array()
        w = states[i, 2:] - obs.velocity.as_array()
        p1 = phi1(states[i], obs, gains.alpha0)
        lf = lie_f_phi1(states, i, obs, gains, params)
        dp, dv, obs_block = _lie_f_phi1_gradients(states, i, obs, gains, params)

        # Own-control row: L_g(L_f phi1) + d/dt(L_g phi1) + beta * L_g phi1,
        # all with the -identity actuation folded in.
        b_row = -dv[i] - 2.0 * w - 2.0 * gains.beta * e

        a: dict[int, np.ndarray] = {}
        for j in nbrs:
            a_j = -dp[j]
            if obs.agent_index == j:
                a_j = a_j + gains.alpha1 * (2.0 * w + 2.0 * gains.alpha0 * e)
            a[j] = a_j

        # Uncontrolled terms: drift derivative of L_f phi1 over every state
        # block it depends on, plus the class-K ladder terms.
        q_entry = gains.alpha1 * gains.alpha2 * p1 + gains.beta * lf
        for m, gp in dp.items():
            q_entry += gp @ states[m, 2:]
        for m, gv in dv.items():
            q_entry += gv @ nominal_control(states, params, m)
        if obs_block is not None:
            gp_o, _gv_o = obs_block  # obstacle acceleration is zero
            q_entry += gp_o @ obs.velocity.as_array()

        rows.append(
            SafetyRow(
                obstacle_id=obs.id,
                a=a,
                b_row=b_row,
                q_entry=float(q_entry),
                h_value=h(states[i], obs),
                phi1_value=p1,
            )
        )
    return SafetySystem(agent=i, neighbor_order=nbrs, rows=rows)
