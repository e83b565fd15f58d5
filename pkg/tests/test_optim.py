import numpy as np

from swarmsafe.checks import gamma_grid, lp_oracle_suite
from swarmsafe.model import Polytope
from swarmsafe.optim import (
    LinprogResult,
    check_kkt,
    maxmin_capability,
    qp_safety_filter,
    solve_lp,
)


class TestSimplex:
    def test_simple_maximization(self):
        # max x (as min -x) subject to x <= 3, -x <= 0.
        res = solve_lp([-1.0], [[1.0], [-1.0]], [3.0, 0.0])
        assert res.status == "optimal"
        assert np.isclose(res.x[0], 3.0)

    def test_free_variable_negative_optimum(self):
        res = solve_lp([1.0], [[-1.0]], [5.0])  # min x s.t. x >= -5
        assert res.status == "optimal"
        assert np.isclose(res.x[0], -5.0)

    def test_infeasible(self):
        res = solve_lp([1.0], [[1.0], [-1.0]], [1.0, -2.0])  # x <= 1 and x >= 2
        assert res.status == "infeasible"

    def test_unbounded(self):
        res = solve_lp([-1.0], [[-1.0]], [0.0])  # max x s.t. x >= 0
        assert res.status == "unbounded"

    def test_duals_certify_optimum(self):
        c = np.array([-1.0, -2.0])
        A = np.array([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
        b = np.array([4.0, 3.0, 3.0])
        res = solve_lp(c, A, b)
        assert res.status == "optimal"
        assert np.isclose(c @ res.x, -7.0)  # x=(1,3)
        assert np.all(res.duals >= -1e-9)
        assert np.allclose(c + A.T @ res.duals, 0.0, atol=1e-9)

    def test_deterministic_on_degenerate_problem(self):
        # Redundant constraints through the optimum; Bland's rule makes the
        # pivot path (hence the reported solution) reproducible.
        A = [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]
        b = [1.0, 1.0, 1.0, 0.0, 0.0]
        first = solve_lp([-1.0, -1.0], A, b)
        for _ in range(5):
            again = solve_lp([-1.0, -1.0], A, b)
            assert np.array_equal(first.x, again.x)


class TestMaxminCapability:
    def test_orthant_instance(self):
        res = maxmin_capability(np.array([[1.0, 0.0], [0.0, 1.0]]), Polytope.box(1.0))
        assert res.status == "optimal"
        assert np.isclose(res.gamma, 1.0)
        assert np.allclose(res.u_star, [1.0, 1.0])

    def test_opposed_rows_cancel(self):
        res = maxmin_capability(np.array([[1.0, 0.0], [-1.0, 0.0]]), Polytope.box(1.0))
        assert res.status == "optimal"
        assert np.isclose(res.gamma, 0.0, atol=1e-9)
        assert np.isclose(res.u_star[0], 0.0, atol=1e-9)

    def test_empty_system_sentinel(self):
        res = maxmin_capability(np.zeros((0, 2)), Polytope.box(1.0))
        assert res.status == "optimal"
        assert res.gamma == np.inf
        assert np.allclose(res.u_star, 0.0)

    def test_infeasible_polytope(self):
        poly = Polytope([[1.0, 0.0], [-1.0, 0.0]], [1.0, -2.0])
        res = maxmin_capability(np.eye(2), poly)
        assert res.status == "infeasible"

    def test_grid_oracle_equivalence(self):
        results = lp_oracle_suite(100, seed=12345)
        assert all(r.passed for r in results), [r.detail for r in results if not r.passed]

    def test_solution_feeds_back_to_gamma(self):
        rng = np.random.default_rng(99)
        for _ in range(50):
            B = rng.normal(0, 2, size=(int(rng.integers(1, 5)), 2))
            res = maxmin_capability(B, Polytope.box(float(rng.uniform(0.5, 15.0))))
            assert res.status == "optimal"
            assert abs(res.gamma - float(np.min(B @ res.u_star))) <= 1e-8


class TestSafetyFilterQp:
    def test_unconstrained_center(self):
        res = qp_safety_filter(np.zeros(2), [], Polytope.box(15.0))
        assert res.status == "optimal"
        assert np.allclose(res.u_s, 0.0)

    def test_single_halfspace_projection(self):
        res = qp_safety_filter(np.zeros(2), [(np.array([1.0, 0.0]), 2.0)], Polytope.box(15.0))
        assert res.status == "optimal"
        assert np.allclose(res.u_s, [2.0, 0.0], atol=1e-12)

    def test_corner_projection(self):
        halfspaces = [(np.array([1.0, 0.0]), 1.0), (np.array([0.0, 1.0]), 1.0)]
        res = qp_safety_filter(np.zeros(2), halfspaces, Polytope.box(15.0))
        assert res.status == "optimal"
        assert np.allclose(res.u_s, [1.0, 1.0], atol=1e-12)

    def test_infeasible_reported(self):
        res = qp_safety_filter(np.zeros(2), [(np.array([1.0, 0.0]), 5.0)], Polytope.box(1.0))
        assert res.status == "infeasible"

    def test_projection_variational_inequality(self):
        rng = np.random.default_rng(1234)
        for _ in range(100):
            center = rng.uniform(-5, 5, size=2)
            halfspaces = [
                (rng.normal(0, 1, size=2), float(rng.uniform(-3, 1)))
                for _ in range(int(rng.integers(0, 4)))
            ]
            box = Polytope.box(float(rng.uniform(2.0, 10.0)))
            res = qp_safety_filter(center, halfspaces, box)
            if res.status != "optimal":
                continue
            # (u - z) . (v - u) >= 0 for feasible v characterizes projection.
            found = 0
            while found < 100:
                v = rng.uniform(-box.l[0], box.l[0], size=2)
                if not box.contains(v):
                    continue
                if any(c @ v < d - 1e-12 for c, d in halfspaces):
                    continue
                found += 1
                assert (res.u_s - center) @ (v - res.u_s) >= -1e-8

    def test_halfspace_scaling_invariance(self):
        c, d = np.array([0.7, -0.4]), 1.3
        base = qp_safety_filter(np.zeros(2), [(c, d)], Polytope.box(15.0))
        for lam in (0.1, 3.0, 250.0):
            scaled = qp_safety_filter(np.zeros(2), [(lam * c, lam * d)], Polytope.box(15.0))
            assert np.allclose(base.u_s, scaled.u_s, atol=1e-9)


class TestKktCertificates:
    def test_optimal_results_have_small_residuals(self):
        rng = np.random.default_rng(55)
        for _ in range(30):
            B = rng.normal(0, 2, size=(3, 2))
            lp = maxmin_capability(B, Polytope.box(5.0))
            report = check_kkt(lp)
            assert report.applicable
            assert report.max_residual <= 1e-8
        qp = qp_safety_filter(
            np.zeros(2), [(np.array([1.0, 0.0]), 2.0)], Polytope.box(15.0)
        )
        report = check_kkt(qp)
        assert report.applicable and report.max_residual <= 1e-8

    def test_perturbed_solution_flagged(self):
        qp = qp_safety_filter(
            np.zeros(2), [(np.array([1.0, 0.0]), 2.0)], Polytope.box(15.0)
        )
        qp.u_s = qp.u_s + np.array([1e-3, 0.0])
        assert check_kkt(qp).max_residual > 1e-4

    def test_not_applicable_for_failed_solves(self):
        qp = qp_safety_filter(np.zeros(2), [(np.array([1.0, 0.0]), 5.0)], Polytope.box(1.0))
        assert not check_kkt(qp).applicable

    def test_unsupported_type_rejected(self):
        try:
            check_kkt(LinprogResult("optimal", np.zeros(1), np.zeros(0)))
        except TypeError:
            pass
        else:
            raise AssertionError("expected TypeError")


def test_grid_oracle_is_monotone_in_resolution():
    B = np.array([[1.0, 2.0], [-0.5, 0.3], [0.9, -1.1]])
    coarse = gamma_grid(B, 5.0, resolution=51)
    fine = gamma_grid(B, 5.0, resolution=201)
    # Finer grids can only find better (larger) max-min values.
    assert fine >= coarse - 1e-12
