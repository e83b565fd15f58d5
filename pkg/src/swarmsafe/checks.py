"""Independent oracles and the runnable property suites.

Three suites back the `swarmsafe suite` command and the test suite reuses
their helpers directly:

* LP oracle: the epigraph solver against dense grid enumeration over the box;
* finite differences: every closed-form Lie derivative against central
  differences of the actual flow;
* invariance: frame independence of the controller and closed-loop forward
  invariance of the barrier for a single agent.

The flow used by the differencing oracles integrates the closed-loop
dynamics directly (one RK4 step of size +/-eps); it never touches the
analytic gradient code it is checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import barrier
from .formation import FormationParams, nominal_control, spring_control
from .model import FormationGraph, Gains, Obstacle, Polytope, SpringParams, Vec2
from .optim import check_kkt, maxmin_capability


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str = ""


# ---------------------------------------------------------------------------
# grid oracle for the max-min LP
# ---------------------------------------------------------------------------

def gamma_grid(B: np.ndarray, limit: float, resolution: int = 201) -> float:
    """Brute-force max over a grid of min_k [B u]_k on the box ||u||_inf <= limit."""
    B = np.asarray(B, dtype=float).reshape(-1, 2)
    axis = np.linspace(-limit, limit, resolution)
    ux, uy = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([ux.ravel(), uy.ravel()])  # (2, R^2)
    vals = B @ pts  # (K, R^2)
    return float(np.max(np.min(vals, axis=0)))


def lp_oracle_suite(n_instances: int = 100, seed: int = 12345) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    worst_gap, worst_kkt = 0.0, 0.0
    ok = True
    for idx in range(n_instances):
        K = int(rng.integers(1, 5))
        # Rows with norm <= 1 keep min_k [B u]_k 1-Lipschitz, so the true
        # optimum is provably within one grid step of the best grid point.
        angles = rng.uniform(0.0, 2.0 * np.pi, size=K)
        radii = rng.uniform(0.1, 1.0, size=K)
        B = radii[:, None] * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        limit = float(rng.uniform(0.5, 15.0))
        res = maxmin_capability(B, Polytope.box(limit))
        if res.status != "optimal":
            ok = False
            results.append(CheckResult("lp-oracle", f"instance-{idx}", False, res.status))
            continue
        gap = abs(res.gamma - gamma_grid(B, limit))
        step = 2.0 * limit / 200.0
        kkt = check_kkt(res).max_residual
        worst_gap = max(worst_gap, gap / step)
        worst_kkt = max(worst_kkt, kkt)
        if gap > step or res.gamma < gamma_grid(B, limit) - 1e-9 or kkt > 1e-8:
            ok = False
            results.append(
                CheckResult("lp-oracle", f"instance-{idx}", False,
                            f"gap={gap:.3e} step={step:.3e} kkt={kkt:.3e}")
            )
    results.append(
        CheckResult(
            "lp-oracle",
            f"{n_instances} random instances vs 201x201 grid",
            ok,
            f"worst gap {worst_gap:.3f} grid steps, worst KKT residual {worst_kkt:.2e}",
        )
    )
    return results


# ---------------------------------------------------------------------------
# finite-difference oracles
# ---------------------------------------------------------------------------

def _flow_step(
    states: np.ndarray,
    obstacles: list[Obstacle],
    params: FormationParams,
    dt: float,
    u_own: tuple[int, np.ndarray] | None = None,
    u_vel: dict[int, np.ndarray] | None = None,
):
    """One RK4 step of the full closed-loop system (states and obstacles).

    ``u_own`` applies a constant filter acceleration to one agent;
    ``u_vel`` applies virtual velocity-space controls (pdot_j = v_j - u_j).
    Obstacles drift at constant velocity.
    """
    u_vel = u_vel or {}

    def deriv(x):
        out = np.empty_like(x)
        for m in range(x.shape[0]):
            out[m, :2] = x[m, 2:]
            if m in u_vel:
                out[m, :2] = out[m, :2] - u_vel[m]
            out[m, 2:] = nominal_control(x, params, m)
            if u_own is not None and u_own[0] == m:
                out[m, 2:] = out[m, 2:] - u_own[1]
        return out

    k1 = deriv(states)
    k2 = deriv(states + 0.5 * dt * k1)
    k3 = deriv(states + 0.5 * dt * k2)
    k4 = deriv(states + dt * k3)
    new_states = states + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    new_obstacles = [
        Obstacle(o.id, Vec2.from_array(o.position.as_array() + dt * o.velocity.as_array()),
                 o.velocity, o.radius_margin, o.agent_index)
        for o in obstacles
    ]
    return new_states, new_obstacles


def _obs_at(states, obs: Obstacle) -> Obstacle:
    """Agent-backed obstacles read their live state; static ones pass through."""
    if obs.agent_index is None:
        return obs
    j = obs.agent_index
    return Obstacle(obs.id, Vec2.from_array(states[j, :2]), Vec2.from_array(states[j, 2:]),
                    obs.radius_margin, j)


def fd_phi1_dot(
    states: np.ndarray,
    i: int,
    obs: Obstacle,
    gains: Gains,
    params: FormationParams,
    u_s: np.ndarray | None = None,
    eps: float = 1e-6,
) -> float:
    """Central difference of phi1 along the flow, u_s constant on agent i."""
    u_own = None if u_s is None else (i, np.asarray(u_s, dtype=float))
    sp, op_ = _flow_step(states, [obs], params, eps, u_own=u_own)
    sm, om_ = _flow_step(states, [obs], params, -eps, u_own=u_own)
    fp = barrier.phi1(sp[i], _obs_at(sp, op_[0]), gains.alpha0)
    fm = barrier.phi1(sm[i], _obs_at(sm, om_[0]), gains.alpha0)
    return (fp - fm) / (2.0 * eps)


def _phi2(states, i, obs: Obstacle, gains: Gains, params, u_s) -> float:
    """phi2 = phi1dot + alpha1*phi1 with the analytic (separately validated)
    first-order pieces; used by the layered second-order oracle."""
    obs = _obs_at(states, obs)
    lf = barrier.lie_f_phi1(states, i, obs, gains, params)
    row = -barrier.lie_g_phi1(states[i], obs)
    p1 = barrier.phi1(states[i], obs, gains.alpha0)
    return lf + float(row @ u_s) + gains.alpha1 * p1


def fd_second_order(
    states: np.ndarray,
    i: int,
    obs: Obstacle,
    gains: Gains,
    params: FormationParams,
    u_s: np.ndarray,
    u_vel: dict[int, np.ndarray] | None = None,
    eps: float = 1e-6,
) -> float:
    """Central-difference oracle for Phi = phi2dot + alpha2*phi2 along the
    flow with agent i's filter constant and neighbors in velocity control."""
    u_own = (i, np.asarray(u_s, dtype=float))
    sp, op_ = _flow_step(states, [obs], params, eps, u_own=u_own, u_vel=u_vel)
    sm, om_ = _flow_step(states, [obs], params, -eps, u_own=u_own, u_vel=u_vel)
    fp = _phi2(sp, i, op_[0], gains, params, u_s)
    fm = _phi2(sm, i, om_[0], gains, params, u_s)
    f0 = _phi2(states, i, obs, gains, params, u_s)
    return (fp - fm) / (2.0 * eps) + gains.alpha2 * f0


def fd_second_order_nested(
    states: np.ndarray,
    i: int,
    obs: Obstacle,
    gains: Gains,
    params: FormationParams,
    u_s: np.ndarray,
    u_vel: dict[int, np.ndarray] | None = None,
    eps: float = 1e-4,
) -> float:
    """Fully nested variant: phi2 itself is estimated by differencing phi1,
    so nothing analytic beyond phi1 enters.  Coarser step to keep the nested
    rounding noise below the comparison tolerance."""
    u_own = (i, np.asarray(u_s, dtype=float))

    def phi2_at(x, o):
        # phi1dot via inner central difference around (x, o).
        xp, op_ = _flow_step(x, [o], params, eps, u_own=u_own, u_vel=u_vel)
        xm, om_ = _flow_step(x, [o], params, -eps, u_own=u_own, u_vel=u_vel)
        d = (barrier.phi1(xp[i], _obs_at(xp, op_[0]), gains.alpha0)
             - barrier.phi1(xm[i], _obs_at(xm, om_[0]), gains.alpha0)) / (2.0 * eps)
        return d + gains.alpha1 * barrier.phi1(x[i], _obs_at(x, o), gains.alpha0)

    sp, op_ = _flow_step(states, [obs], params, eps, u_own=u_own, u_vel=u_vel)
    sm, om_ = _flow_step(states, [obs], params, -eps, u_own=u_own, u_vel=u_vel)
    f0 = phi2_at(states, obs)
    return (phi2_at(sp, op_[0]) - phi2_at(sm, om_[0])) / (2.0 * eps) + gains.alpha2 * f0


# ---------------------------------------------------------------------------
# random problem generator shared by suites and tests
# ---------------------------------------------------------------------------

def random_formation(rng: np.random.Generator, n: int = 3):
    """Random fully-connected formation with well-separated agents."""
    edges = {}
    for a in range(n):
        for b in range(a + 1, n):
            edges[(a, b)] = SpringParams(
                stiffness=float(rng.uniform(1.0, 5.0)),
                damping=float(rng.uniform(0.2, 2.0)),
                rest_length=float(rng.uniform(2.0, 4.0)),
            )
    graph = FormationGraph(n, edges)
    while True:
        pos = rng.uniform(-5.0, 5.0, size=(n, 2))
        dists = [np.linalg.norm(pos[a] - pos[b]) for a in range(n) for b in range(a + 1, n)]
        if min(dists) > 0.5:
            break
    vel = rng.uniform(-2.0, 2.0, size=(n, 2))
    states = np.hstack([pos, vel])
    params = FormationParams(graph, [float(rng.uniform(0.3, 2.0)) for _ in range(n)])
    return states, params


def random_obstacle(rng: np.random.Generator, states, agent_obstacle: int | None = None):
    if agent_obstacle is not None:
        return Obstacle(f"agent:{agent_obstacle}",
                        Vec2.from_array(states[agent_obstacle, :2]),
                        Vec2.from_array(states[agent_obstacle, 2:]),
                        float(rng.uniform(0.5, 1.5)), agent_obstacle)
    return Obstacle(
        "obs",
        Vec2(float(rng.uniform(-6, 6)), float(rng.uniform(-6, 6))),
        Vec2(float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1))),
        float(rng.uniform(0.5, 1.5)),
    )


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


def finite_difference_suite(n_states: int = 200, seed: int = 777) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst_first, worst_second = 0.0, 0.0
    for _ in range(n_states):
        states, params = random_formation(rng)
        i = int(rng.integers(0, states.shape[0]))
        as_agent = rng.random() < 0.4
        if as_agent:
            choices = [j for j in range(states.shape[0]) if j != i]
            obs = random_obstacle(rng, states, int(rng.choice(choices)))
        else:
            obs = random_obstacle(rng, states)
        gains = Gains(*(float(rng.uniform(0.5, 3.0)) for _ in range(3)))

        analytic = barrier.lie_f_phi1(states, i, obs, gains, params)
        fd = fd_phi1_dot(states, i, obs, gains, params)
        worst_first = max(worst_first, _rel_err(analytic, fd))

        u_s = rng.uniform(-3, 3, size=2)
        system = barrier.assemble(states, i, [obs], gains, params)
        phi_own = float(system.evaluate({}, u_s)[0])
        fd2 = fd_second_order(states, i, obs, gains, params, u_s)
        worst_second = max(worst_second, _rel_err(phi_own, fd2))

        nbrs = params.graph.neighbors(i)
        u_vel = {j: rng.uniform(-3, 3, size=2) for j in nbrs}
        phi_nbr = float(system.evaluate(u_vel, np.zeros(2))[0])
        fd2n = fd_second_order(states, i, obs, gains, params, np.zeros(2), u_vel=u_vel)
        worst_second = max(worst_second, _rel_err(phi_nbr, fd2n))

    return [
        CheckResult(
            "finite-difference",
            f"phi1dot analytic vs central difference ({n_states} states)",
            worst_first <= 1e-5,
            f"worst relative error {worst_first:.2e} (tol 1e-5)",
        ),
        CheckResult(
            "finite-difference",
            f"capability rows vs differenced safety condition ({n_states} states)",
            worst_second <= 1e-4,
            f"worst relative error {worst_second:.2e} (tol 1e-4)",
        ),
    ]


def invariance_suite(seed: int = 4242) -> list[CheckResult]:
    from . import sim  # local import: keeps checks importable without sim users
    from .model import AgentState, Scenario

    rng = np.random.default_rng(seed)
    results = []

    # Frame independence of the spring controller.
    worst = 0.0
    for _ in range(50):
        states, params = random_formation(rng)
        i = int(rng.integers(0, states.shape[0]))
        base = spring_control(states, params.graph, i, params.masses[i])
        shift = rng.uniform(-10, 10, size=2)
        shifted = states.copy()
        shifted[:, :2] += shift
        worst = max(worst, float(np.max(np.abs(
            spring_control(shifted, params.graph, i, params.masses[i]) - base))))
        theta = float(rng.uniform(0, 2 * np.pi))
        R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        rotated = np.hstack([states[:, :2] @ R.T, states[:, 2:] @ R.T])
        worst = max(worst, float(np.max(np.abs(
            spring_control(rotated, params.graph, i, params.masses[i]) - R @ base))))
    results.append(
        CheckResult("invariance", "spring controller translation/rotation equivariance",
                    worst <= 1e-9, f"worst deviation {worst:.2e}")
    )

    # Single-agent forward invariance around one static obstacle.
    worst_h = np.inf
    graph = FormationGraph(1, {})
    for _ in range(20):
        obs = Obstacle("o", Vec2(0.0, 0.0), Vec2(0.0, 0.0), 1.0)
        gains = Gains(2.0, 2.0, 2.0)
        state = _sample_safe_state(rng, obs, gains)
        scenario = Scenario(
            graph=graph,
            initial_states=[AgentState(Vec2.from_array(state[:2]), Vec2.from_array(state[2:]))],
            obstacles=[obs],
            sensing_radius=8.0,
            masses=[0.5],
            gains=[gains],
            control_limit=15.0,
            dt=0.02,
            duration=4.0,
        )
        res = sim.run(scenario)
        worst_h = min(worst_h, res.min_h)
    results.append(
        CheckResult("invariance", "single-agent forward invariance (20 runs, 4 s)",
                    worst_h >= -1e-6, f"min h {worst_h:.3e}")
    )
    return results


def _sample_safe_state(rng: np.random.Generator, obs: Obstacle, gains: Gains) -> np.ndarray:
    """Random agent state inside both ladder sets around the obstacle."""
    while True:
        angle = float(rng.uniform(0, 2 * np.pi))
        dist = float(rng.uniform(obs.radius_margin + 0.5, 6.0))
        pos = obs.position.as_array() + dist * np.array([np.cos(angle), np.sin(angle)])
        vel = rng.uniform(-2.0, 2.0, size=2)
        state = np.concatenate([pos, vel])
        if barrier.h(state, obs) > 0 and barrier.phi1(state, obs, gains.alpha0) > 0:
            return state


def run_all_suites() -> list[CheckResult]:
    out = []
    out.extend(lp_oracle_suite())
    out.extend(finite_difference_suite(n_states=100))
    out.extend(invariance_suite())
    return out
