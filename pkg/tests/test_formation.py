import numpy as np
import pytest

from swarmsafe import sim
from swarmsafe.formation import (
    CoincidentAgentsError,
    FormationParams,
    apply_filter,
    closed_loop_drift,
    control_jac_pos,
    control_jac_vel,
    nominal_control,
    spring_control,
)
from swarmsafe.model import (
    AgentState,
    FormationGraph,
    Gains,
    Scenario,
    SpringParams,
    Vec2,
)


def _pair_graph(k=3.0, b=1.0, R=3.0) -> FormationGraph:
    return FormationGraph(2, {(0, 1): SpringParams(k, b, R)})


class TestSpringControl:
    def test_rest_length_zero_velocity_gives_zero(self):
        states = np.array([[0.0, 0.0, 0.0, 0.0], [3.0, 0.0, 0.0, 0.0]])
        out = spring_control(states, _pair_graph(), 0, 0.5)
        assert np.allclose(out, 0.0, atol=1e-12)

    def test_single_neighbor_stretched_literal_sign(self):
        # Stretch 1 along +x, k=3, m=0.5: spring term 3*1*(1,0)/0.5 = (6,0).
        states = np.array([[4.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]])
        out = spring_control(states, _pair_graph(), 0, 0.5, "paper_literal")
        assert np.allclose(out, [6.0, 0.0], atol=1e-12)

    def test_single_neighbor_stretched_restoring_sign(self):
        states = np.array([[4.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]])
        out = spring_control(states, _pair_graph(), 0, 0.5, "restoring")
        assert np.allclose(out, [-6.0, 0.0], atol=1e-12)

    def test_damping_only(self):
        # Zero stretch, v=(2,0), b=1, m=0.5: -1*(2,0)/0.5 = (-4,0).
        states = np.array([[3.0, 0.0, 2.0, 0.0], [0.0, 0.0, 0.0, 0.0]])
        out = spring_control(states, _pair_graph(), 0, 0.5)
        assert np.allclose(out, [-4.0, 0.0], atol=1e-12)

    def test_coincident_agents_error_carries_pair(self):
        states = np.zeros((2, 4))
        with pytest.raises(CoincidentAgentsError) as exc:
            spring_control(states, _pair_graph(), 1, 0.5)
        assert exc.value.pair == (1, 0)

    def test_pair_antisymmetry_of_spring_term(self):
        # Zero velocity isolates the spring term; equal masses.
        rng = np.random.default_rng(7)
        for _ in range(20):
            states = np.zeros((2, 4))
            states[:, :2] = rng.uniform(-5, 5, size=(2, 2))
            if np.linalg.norm(states[0, :2] - states[1, :2]) < 0.5:
                continue
            f0 = spring_control(states, _pair_graph(), 0, 1.0)
            f1 = spring_control(states, _pair_graph(), 1, 1.0)
            assert np.allclose(f0, -f1, atol=1e-12)

    def test_translation_invariance(self):
        rng = np.random.default_rng(8)
        states = np.array([[4.0, 1.0, 0.5, -0.2], [0.0, 0.0, 1.0, 0.3]])
        base = spring_control(states, _pair_graph(), 0, 0.5)
        shifted = states.copy()
        shifted[:, :2] += rng.uniform(-10, 10, size=2)
        out = spring_control(shifted, _pair_graph(), 0, 0.5)
        assert np.allclose(out, base, atol=1e-12)

    def test_rotation_equivariance(self):
        states = np.array([[4.0, 1.0, 0.5, -0.2], [0.0, 0.0, 1.0, 0.3]])
        base = spring_control(states, _pair_graph(), 0, 0.5)
        theta = 0.83
        R = np.array(
            [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
        )
        rotated = np.hstack([states[:, :2] @ R.T, states[:, 2:] @ R.T])
        out = spring_control(rotated, _pair_graph(), 0, 0.5)
        assert np.allclose(out, R @ base, atol=1e-12)


class TestDriftAndFilter:
    def test_rest_formation_is_equilibrium(self):
        states = np.array([[0.0, 0.0, 0.0, 0.0], [3.0, 0.0, 0.0, 0.0]])
        params = FormationParams(_pair_graph(), [0.5, 0.5])
        assert np.allclose(closed_loop_drift(states, params, 0), 0.0, atol=1e-12)

    def test_pure_transport(self):
        states = np.array([[0.0, 0.0, 1.0, 0.0], [3.0, 0.0, 1.0, 0.0]])
        params = FormationParams(_pair_graph(b=0.0), [0.5, 0.5])
        assert np.allclose(
            closed_loop_drift(states, params, 0), [1.0, 0.0, 0.0, 0.0], atol=1e-12
        )

    def test_drift_composes_spring_control(self):
        states = np.array([[4.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]])
        params = FormationParams(_pair_graph(), [0.5, 0.5], "paper_literal")
        assert np.allclose(
            closed_loop_drift(states, params, 0), [0.0, 0.0, 6.0, 0.0], atol=1e-12
        )

    def test_leader_input_added(self):
        states = np.array([[0.0, 0.0, 0.0, 0.0], [3.0, 0.0, 0.0, 0.0]])
        params = FormationParams(
            _pair_graph(), [0.5, 0.5], leader_inputs={0: Vec2(2.0, -1.0)}
        )
        assert np.allclose(nominal_control(states, params, 0), [2.0, -1.0])
        assert np.allclose(nominal_control(states, params, 1), 0.0)

    def test_apply_filter(self):
        assert np.allclose(apply_filter([6.0, 0.0], [0.0, 0.0]), [6.0, 0.0])
        assert np.allclose(apply_filter([6.0, 0.0], [6.0, 0.0]), [0.0, 0.0])
        assert np.allclose(apply_filter([1.0, 2.0], [0.5, -1.0]), [0.5, 3.0])


class TestJacobians:
    def test_position_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        graph = FormationGraph(
            3,
            {
                (0, 1): SpringParams(3.0, 1.0, 3.0),
                (0, 2): SpringParams(2.0, 0.5, 2.5),
                (1, 2): SpringParams(1.5, 0.7, 3.5),
            },
        )
        params = FormationParams(graph, [0.5, 0.8, 1.2])
        states = np.hstack(
            [rng.uniform(-4, 4, size=(3, 2)), rng.uniform(-2, 2, size=(3, 2))]
        )
        eps = 1e-7
        for i in range(3):
            for m in range(3):
                Jp = control_jac_pos(states, params, i, m)
                Jv = control_jac_vel(states, params, i, m)
                for axis in range(2):
                    bump = states.copy()
                    bump[m, axis] += eps
                    dip = states.copy()
                    dip[m, axis] -= eps
                    fd_p = (
                        nominal_control(bump, params, i)
                        - nominal_control(dip, params, i)
                    ) / (2 * eps)
                    assert np.allclose(Jp[:, axis], fd_p, atol=1e-5)
                    bump = states.copy()
                    bump[m, 2 + axis] += eps
                    dip = states.copy()
                    dip[m, 2 + axis] -= eps
                    fd_v = (
                        nominal_control(bump, params, i)
                        - nominal_control(dip, params, i)
                    ) / (2 * eps)
                    assert np.allclose(Jv[:, axis], fd_v, atol=1e-5)


class TestEnergyDissipation:
    def test_damped_pair_energy_non_increasing(self):
        # Two agents released from stretch with damping: spring + kinetic
        # energy never increases along the simulated trajectory.
        k, b, R = 3.0, 1.0, 3.0
        m = 0.5
        sc = Scenario(
            graph=_pair_graph(k, b, R),
            initial_states=[
                AgentState(Vec2(0.0, 0.0), Vec2(0.0, 0.0)),
                AgentState(Vec2(5.0, 0.0), Vec2(0.0, 0.0)),
            ],
            obstacles=[],
            sensing_radius=1.1,  # below separation: filter never engages
            masses=[m, m],
            gains=[Gains(2.0, 2.0, 2.0)] * 2,
            control_limit=50.0,
            dt=0.01,
            duration=6.0,
        )
        result = sim.run(sc)

        def energy(states):
            stretch = np.linalg.norm(states[0, :2] - states[1, :2]) - R
            kinetic = 0.5 * m * float(np.sum(states[:, 2:] ** 2))
            return 0.5 * k * stretch**2 + kinetic

        energies = [energy(r.states) for r in result.records]
        e0 = energies[0]
        for prev, cur in zip(energies, energies[1:]):
            assert cur <= prev + 1e-6 * max(1.0, abs(e0))
        assert energies[-1] < 0.1 * e0  # damping actually dissipates
