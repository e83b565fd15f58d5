import numpy as np

from swarmsafe import barrier
from swarmsafe.checks import (
    fd_phi1_dot,
    fd_second_order,
    fd_second_order_nested,
    random_formation,
    random_obstacle,
)
from swarmsafe.formation import FormationParams
from swarmsafe.model import FormationGraph, Gains, Obstacle, SpringParams, Vec2

STATIC = Obstacle("o", Vec2(0.0, 0.0), Vec2(0.0, 0.0), 1.0)


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


class TestLadderFunctions:
    def test_h_examples(self):
        assert barrier.h([0.0, 0.0, 0.0, 0.0], STATIC) == -1.0
        assert barrier.h([1.0, 0.0, 0.0, 0.0], STATIC) == 0.0
        assert barrier.h([2.0, 0.0, 0.0, 0.0], STATIC) == 3.0

    def test_phi1_static_zero_velocity_reduces_to_alpha0_h(self):
        state = [1.7, -0.4, 0.0, 0.0]
        for alpha0 in (0.5, 2.0):
            assert np.isclose(
                barrier.phi1(state, STATIC, alpha0), alpha0 * barrier.h(state, STATIC)
            )

    def test_phi1_hand_value(self):
        # p=(2,0), v=(1,0), r=1, alpha0=1: 2*(1*2) + 1*3 = 7.
        assert barrier.phi1([2.0, 0.0, 1.0, 0.0], STATIC, 1.0) == 7.0

    def test_phi1_co_moving_obstacle(self):
        obs = Obstacle("m", Vec2(0.0, 0.0), Vec2(1.3, -0.2), 1.0)
        state = [2.0, 1.0, 1.3, -0.2]
        assert np.isclose(barrier.phi1(state, obs, 2.0), 2.0 * barrier.h(state, obs))

    def test_lie_g_phi1(self):
        assert np.allclose(barrier.lie_g_phi1([0.0, 0.0, 1.0, 1.0], STATIC), 0.0)
        assert np.allclose(barrier.lie_g_phi1([2.0, 1.0, 0.0, 0.0], STATIC), [4.0, 2.0])

    def test_joint_translation_invariance(self):
        state = np.array([2.0, 1.0, 0.7, -0.3])
        shift = np.array([5.0, -2.0])
        obs2 = Obstacle("o", Vec2.from_array(shift), Vec2(0.0, 0.0), 1.0)
        shifted = state.copy()
        shifted[:2] += shift
        assert np.isclose(barrier.h(shifted, obs2), barrier.h(state, STATIC))
        assert np.isclose(
            barrier.phi1(shifted, obs2, 2.0), barrier.phi1(state, STATIC, 2.0)
        )
        assert np.allclose(
            barrier.lie_g_phi1(shifted, obs2), barrier.lie_g_phi1(state, STATIC)
        )


class TestFirstOrderConstraint:
    def test_row_is_folded_velocity_gradient(self):
        rng = np.random.default_rng(3)
        states, params = random_formation(rng)
        obs = random_obstacle(rng, states)
        c, _ = barrier.first_order_constraint(states, 0, obs, Gains(2, 2, 2), params)
        assert np.allclose(c, -barrier.lie_g_phi1(states[0], obs))

    def test_interior_constraint_inactive_at_zero(self):
        # Far from the obstacle with zero velocity: rhs strongly negative.
        graph = FormationGraph(1, {})
        params = FormationParams(graph, [0.5])
        states = np.array([[6.0, 0.0, 0.0, 0.0]])
        c, d = barrier.first_order_constraint(
            states, 0, STATIC, Gains(2.0, 2.0, 2.0), params
        )
        assert d < -10.0
        assert c @ np.zeros(2) >= d

    def test_boundary_case_rhs_is_drift_term(self):
        # With phi1 = 0 the rhs reduces to -L_f phi1.  Pick v so that
        # 2 w.e = -alpha0 * h: e=(2,0), h=3, alpha0=2 -> w.e = -3.
        graph = FormationGraph(1, {})
        params = FormationParams(graph, [0.5])
        states = np.array([[2.0, 0.0, -1.5, 0.7]])
        gains = Gains(2.0, 2.0, 2.0)
        assert abs(barrier.phi1(states[0], STATIC, gains.alpha0)) < 1e-12
        _, d = barrier.first_order_constraint(states, 0, STATIC, gains, params)
        assert np.isclose(d, -barrier.lie_f_phi1(states, 0, STATIC, gains, params))


class TestLieDerivativeOracles:
    def test_lie_f_phi1_matches_central_difference(self):
        rng = np.random.default_rng(101)
        worst = 0.0
        for _ in range(200):
            states, params = random_formation(rng)
            i = int(rng.integers(0, 3))
            if rng.random() < 0.4:
                choices = [j for j in range(3) if j != i]
                obs = random_obstacle(rng, states, int(rng.choice(choices)))
            else:
                obs = random_obstacle(rng, states)
            gains = Gains(*(float(rng.uniform(0.5, 3.0)) for _ in range(3)))
            analytic = barrier.lie_f_phi1(states, i, obs, gains, params)
            fd = fd_phi1_dot(states, i, obs, gains, params)
            worst = max(worst, _rel_err(analytic, fd))
        assert worst <= 1e-5

    def test_capability_rows_match_differenced_safety_condition(self):
        rng = np.random.default_rng(202)
        worst = 0.0
        for _ in range(200):
            states, params = random_formation(rng)
            i = int(rng.integers(0, 3))
            if rng.random() < 0.4:
                choices = [j for j in range(3) if j != i]
                obs = random_obstacle(rng, states, int(rng.choice(choices)))
            else:
                obs = random_obstacle(rng, states)
            gains = Gains(*(float(rng.uniform(0.5, 3.0)) for _ in range(3)))
            system = barrier.assemble(states, i, [obs], gains, params)

            u_s = rng.uniform(-3, 3, size=2)
            own = float(system.evaluate({}, u_s)[0])
            worst = max(
                worst, _rel_err(own, fd_second_order(states, i, obs, gains, params, u_s))
            )

            u_vel = {j: rng.uniform(-3, 3, size=2) for j in params.graph.neighbors(i)}
            nbr = float(system.evaluate(u_vel, np.zeros(2))[0])
            worst = max(
                worst,
                _rel_err(
                    nbr,
                    fd_second_order(
                        states, i, obs, gains, params, np.zeros(2), u_vel=u_vel
                    ),
                ),
            )
        assert worst <= 1e-4

    def test_nested_oracle_agrees_without_analytic_ingredients(self):
        # Cross-check: the layered oracle reuses the analytic first-order
        # pieces; the nested one differences phi1 only.  Coarser tolerance
        # reflects the nested rounding noise at step 1e-4.
        rng = np.random.default_rng(303)
        for _ in range(15):
            states, params = random_formation(rng)
            obs = random_obstacle(rng, states)
            gains = Gains(2.0, 2.0, 2.0)
            u_s = rng.uniform(-2, 2, size=2)
            system = barrier.assemble(states, 0, [obs], gains, params)
            analytic = float(system.evaluate({}, u_s)[0])
            nested = fd_second_order_nested(states, 0, obs, gains, params, u_s)
            assert abs(analytic - nested) <= 1e-3 * max(1.0, abs(analytic))


class TestAssembly:
    def test_no_sensed_obstacles_empty_system(self):
        rng = np.random.default_rng(5)
        states, params = random_formation(rng)
        system = barrier.assemble(states, 0, [], Gains(2, 2, 2), params)
        assert system.K == 0
        assert system.B.shape == (0, 2)
        assert system.q.shape == (0,)

    def test_isolated_agent_has_no_neighbor_columns(self):
        graph = FormationGraph(1, {})
        params = FormationParams(graph, [0.5])
        states = np.array([[3.0, 0.5, -1.0, 0.2]])
        system = barrier.assemble(states, 0, [STATIC], Gains(2, 2, 2), params)
        assert system.neighbor_order == []
        assert system.A.shape == (1, 0)
        # Phi = B u + q exactly.
        u = np.array([0.3, -0.7])
        assert np.isclose(
            float(system.evaluate({}, u)[0]), float(system.q[0] + system.B[0] @ u)
        )

    def test_evaluation_is_affine(self):
        rng = np.random.default_rng(6)
        states, params = random_formation(rng)
        obs = random_obstacle(rng, states, 1)
        system = barrier.assemble(states, 0, [obs], Gains(2, 2, 2), params)
        nbrs = params.graph.neighbors(0)
        ua, ub = rng.uniform(-3, 3, size=2), rng.uniform(-3, 3, size=2)
        na = {j: rng.uniform(-3, 3, size=2) for j in nbrs}
        nb = {j: rng.uniform(-3, 3, size=2) for j in nbrs}
        for lam in (0.25, 0.5, 0.9):
            mixed = system.evaluate(
                {j: lam * na[j] + (1 - lam) * nb[j] for j in nbrs},
                lam * ua + (1 - lam) * ub,
            )
            interp = lam * system.evaluate(na, ua) + (1 - lam) * system.evaluate(nb, ub)
            assert np.allclose(mixed, interp, atol=1e-12)

    def test_row_count_tracks_sensed_obstacles(self):
        rng = np.random.default_rng(9)
        states, params = random_formation(rng)
        sensed = [random_obstacle(rng, states), random_obstacle(rng, states, 2)]
        sensed[0] = Obstacle("s0", sensed[0].position, sensed[0].velocity, 1.0)
        system = barrier.assemble(states, 0, sensed, Gains(2, 2, 2), params)
        assert system.K == 2
        assert [r.obstacle_id for r in system.rows] == ["s0", "agent:2"]
        for row in system.rows:
            assert set(row.a) == set(params.graph.neighbors(0))
