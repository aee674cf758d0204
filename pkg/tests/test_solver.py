import numpy as np
import pytest

from helpers import (
    degenerate_group_instance,
    random_group_instance,
    random_nuclear_instance,
)
from stabcert.groupnorm import GroupPartition, subgrad_residual
from stabcert.nuclear import NuclearShape, is_subgradient_nuclear, prox_nuclear
from stabcert.solver import (
    ProblemSpec,
    dual_from_solution,
    lipschitz_constant,
    multistart_solve,
    objective,
    prox_gradient_solve,
    solution_spread,
)

PHI = np.array([[1.0, 1.0, 0.0], [1.0, 0.0, -1.0]])
PAIRS = GroupPartition(3, ((0, 1), (2,)))


def pairs_problem(b2=-1.0):
    return ProblemSpec(PHI, np.array([2.0, b2]), 1.0, PAIRS)


class TestProblemSpec:
    def test_rejects_nonpositive_mu(self):
        with pytest.raises(ValueError):
            ProblemSpec(PHI, np.array([2.0, -1.0]), 0.0, PAIRS)

    def test_rejects_dim_mismatch(self):
        with pytest.raises(ValueError):
            ProblemSpec(PHI, np.array([2.0]), 1.0, PAIRS)
        with pytest.raises(ValueError):
            ProblemSpec(PHI, np.array([2.0, -1.0]), 1.0, GroupPartition.singletons(2))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            ProblemSpec(PHI, np.array([np.inf, 0.0]), 1.0, PAIRS)

    def test_nuclear_dimension_check(self):
        phi = np.zeros((1, 4))
        spec = ProblemSpec(phi, np.zeros(1), 1.0, NuclearShape(2, 2))
        assert spec.phi.shape == (1, 4)
        with pytest.raises(ValueError):
            ProblemSpec(np.zeros((1, 5)), np.zeros(1), 1.0, NuclearShape(2, 2))


class TestObjective:
    def test_reference_point_value(self):
        assert objective(pairs_problem(), np.array([0.0, 1.0, 0.0])) == pytest.approx(2.0)

    def test_penalty_only_at_zero_fit(self):
        # x = 0: value is ||b||^2 / (2 mu)
        p = pairs_problem()
        assert objective(p, np.zeros(3)) == pytest.approx(2.5)

    def test_lipschitz_constant(self):
        assert lipschitz_constant(pairs_problem()) == pytest.approx(3.0)
        zero = ProblemSpec(np.zeros((2, 3)), np.zeros(2), 2.0, PAIRS)
        assert lipschitz_constant(zero) == 0.0


class TestScalarShrinkage:
    def test_soft_threshold_solution(self):
        p = ProblemSpec(np.array([[1.0]]), np.array([2.0]), 1.0, GroupPartition.singletons(1))
        res = prox_gradient_solve(p)
        assert res.converged
        assert res.x[0] == pytest.approx(1.0, abs=1e-9)
        assert res.y[0] == pytest.approx(1.0, abs=1e-9)

    def test_subcritical_data_gives_zero(self):
        p = ProblemSpec(np.array([[1.0]]), np.array([0.5]), 1.0, GroupPartition.singletons(1))
        res = prox_gradient_solve(p)
        assert res.x[0] == pytest.approx(0.0, abs=1e-12)
        assert res.y[0] == pytest.approx(0.5, abs=1e-9)


class TestReferenceInstance:
    def test_solution_and_dual(self):
        res = prox_gradient_solve(pairs_problem())
        assert res.converged
        assert res.fixed_point_residual <= 1e-10
        assert np.allclose(res.x, [0.0, 1.0, 0.0], atol=1e-8)
        assert np.allclose(res.y, [0.0, 1.0, 1.0], atol=1e-8)
        assert res.objective == pytest.approx(2.0, abs=1e-12)

    def test_shifted_data_activates_third_coordinate(self):
        res = prox_gradient_solve(pairs_problem(b2=-1.5))
        assert np.allclose(res.x, [0.0, 1.0, 0.5], atol=1e-8)

    def test_dual_matches_formula(self):
        p = pairs_problem()
        res = prox_gradient_solve(p)
        direct = -(PHI.T @ (PHI @ res.x - p.b)) / p.mu
        assert np.array_equal(res.y, dual_from_solution(p, res.x))
        assert np.allclose(res.y, direct, atol=1e-15)


class TestZeroOperator:
    def test_all_starts_collapse_to_zero(self):
        p = ProblemSpec(np.zeros((2, 3)), np.zeros(2), 2.0, PAIRS)
        rng = np.random.default_rng(30)
        for _ in range(5):
            res = prox_gradient_solve(p, x0=rng.standard_normal(3) * 10)
            assert res.converged
            assert np.array_equal(res.x, np.zeros(3))


class TestConvergenceBehavior:
    def test_objective_never_worse_than_start(self):
        rng = np.random.default_rng(31)
        for _ in range(25):
            p = random_group_instance(rng)
            x0 = rng.standard_normal(p.phi.shape[1]) * 3.0
            res = prox_gradient_solve(p, x0=x0)
            assert res.objective <= objective(p, x0) + 1e-12

    def test_kkt_residual_scales_with_tolerance(self):
        rng = np.random.default_rng(32)
        for _ in range(25):
            p = random_group_instance(rng)
            res = prox_gradient_solve(p)
            assert res.converged
            lip = max(lipschitz_constant(p), 1.0)
            assert subgrad_residual(res.x, res.y, p.reg) <= 100 * 1e-10 * lip

    def test_tilted_kkt(self):
        rng = np.random.default_rng(33)
        for _ in range(15):
            p = random_group_instance(rng)
            v = rng.standard_normal(p.phi.shape[1]) * 0.3
            res = prox_gradient_solve(p, v=v)
            lip = max(lipschitz_constant(p), 1.0)
            # optimality: dual + tilt lands in the subdifferential
            assert subgrad_residual(res.x, res.y + v, p.reg) <= 100 * 1e-10 * lip

    def test_nonconvergence_is_flagged_not_raised(self):
        p = pairs_problem()
        res = prox_gradient_solve(p, max_iter=3)
        assert not res.converged
        assert res.iterations == 3

    def test_deterministic_reruns(self):
        p = pairs_problem()
        a = prox_gradient_solve(p)
        b = prox_gradient_solve(p)
        assert np.array_equal(a.x, b.x)
        assert a.iterations == b.iterations
        c = prox_gradient_solve(p, v=np.zeros(3))
        assert np.array_equal(a.x, c.x)

    def test_nuclear_identity_design_matches_prox(self):
        rng = np.random.default_rng(34)
        for _ in range(10):
            bmat = rng.standard_normal((2, 3))
            mu = float(rng.uniform(0.3, 1.2))
            shape = NuclearShape(2, 3)
            p = ProblemSpec(np.eye(6), bmat.ravel(), mu, shape)
            res = prox_gradient_solve(p)
            assert res.converged
            closed = prox_nuclear(bmat, mu)
            assert np.allclose(shape.as_matrix(res.x), closed, atol=1e-8)

    def test_nuclear_random_instances_reach_kkt(self):
        rng = np.random.default_rng(35)
        for _ in range(10):
            p = random_nuclear_instance(rng)
            res = prox_gradient_solve(p)
            assert res.converged
            shape = p.reg
            check = is_subgradient_nuclear(
                shape.as_matrix(res.x), shape.as_matrix(res.y), tol=1e-6
            )
            assert check.ok


class TestMultistart:
    def test_unique_solution_collapses_spread(self):
        p = pairs_problem()
        rng = np.random.default_rng(36)
        starts = [np.zeros(3)] + [rng.standard_normal(3) * 2 for _ in range(4)]
        results = multistart_solve(p, starts)
        assert len(results) == 5
        assert all(r.converged for r in results)
        assert solution_spread(results) <= 1e-6

    def test_degenerate_instance_scatters(self):
        rng = np.random.default_rng(37)
        p, _ = degenerate_group_instance(rng, n=3)
        starts = [np.zeros(3)] + [rng.uniform(0, 2, 3) for _ in range(5)]
        results = multistart_solve(p, starts)
        assert solution_spread(results) >= 1e-3
        # every endpoint is still a genuine solution: same objective value
        vals = [r.objective for r in results]
        assert max(vals) - min(vals) <= 1e-9

    def test_spread_of_identical_results_is_zero(self):
        p = pairs_problem()
        r = prox_gradient_solve(p)
        assert solution_spread([r, r]) == 0.0
        assert solution_spread([r]) == 0.0
