import numpy as np
import pytest

from b2bopt import (
    BlockedIterate,
    NmfProblem,
    SeparableQuadratic,
    generalized_gradient,
    generate_synthetic,
    optimality_report,
    pg_step,
    projected_gradient,
    relative_residual,
    stationarity_equivalence_check,
)


class TestProjectedGradient:
    def test_case_split(self):
        np.testing.assert_array_equal(
            projected_gradient([0.0, 1.0], [2.0, -3.0]), [0.0, -3.0])

    def test_interior_reduces_to_gradient(self):
        g = np.array([1.5, -2.0, 0.25])
        np.testing.assert_array_equal(projected_gradient([1.0, 2.0, 3.0], g), g)

    def test_boundary_cases(self):
        np.testing.assert_array_equal(
            projected_gradient([0.0, 0.0], [-1.0, 4.0]), [-1.0, 0.0])

    def test_componentwise_domination(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            x = np.maximum(rng.standard_normal(10), 0.0)
            g = rng.standard_normal(10)
            assert np.all(np.abs(projected_gradient(x, g)) <= np.abs(g) + 0.0)

    def test_exact_zero_split_not_tolerance_band(self):
        # a tiny positive coordinate counts as interior
        out = projected_gradient([1e-300], [5.0])
        assert out[0] == 5.0


class TestGeneralizedGradient:
    def test_interior_small_step(self):
        x = np.array([2.0, 3.0])
        g = np.array([0.5, -0.5])
        np.testing.assert_allclose(generalized_gradient(x, g, 0.1), g)

    def test_boundary_absorption(self):
        np.testing.assert_array_equal(generalized_gradient([0.0], [5.0], 1.0), [0.0])

    def test_hand_evaluated_clamp(self):
        np.testing.assert_allclose(generalized_gradient([2.0], [1.0], 4.0), [0.5])

    def test_matches_pg_step_identity(self):
        A, _, _ = generate_synthetic(10, 8, 2, seed=4)
        problem = NmfProblem(A, 2)
        rng = np.random.default_rng(1)
        x = BlockedIterate(rng.uniform(0, 1, problem.n), problem.partition)
        g = problem.full_gradient(x.values)
        for alpha in (0.1, 1.0, 2.5):
            G = generalized_gradient(x.values, g, alpha)
            stepped = pg_step(problem, x, alpha)
            np.testing.assert_array_equal(G, (x.values - stepped.values) / alpha)

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ValueError):
            generalized_gradient([1.0], [1.0], 0.0)


class TestRelativeResidual:
    def test_exact_factorization(self):
        rng = np.random.default_rng(2)
        U = rng.uniform(0, 1, (6, 2))
        V = rng.uniform(0, 1, (5, 2))
        assert relative_residual(U @ V.T, U, V) <= 1e-12

    def test_zero_factors(self):
        A = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert relative_residual(A, np.zeros((2, 1)), np.zeros((2, 1))) == pytest.approx(1.0)

    def test_hand_computed_value(self):
        A = np.array([[2.0, 0.0], [0.0, 2.0]])
        U = np.array([[1.0], [1.0]])
        V = np.array([[1.0], [1.0]])
        # residual [[1,-1],[-1,1]]: norm 2 over ||A|| = 2 sqrt(2)
        assert relative_residual(A, U, V) == pytest.approx(1.0 / np.sqrt(2.0))

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError):
            relative_residual(np.zeros((2, 2)), np.ones((2, 1)), np.ones((2, 1)))


class TestOptimalityReport:
    def test_per_block_norms_assemble(self):
        A, _, _ = generate_synthetic(9, 7, 2, seed=8)
        problem = NmfProblem(A, 2)
        x = np.random.default_rng(3).uniform(0, 1, problem.n)
        rep = optimality_report(problem, x)
        assert rep.proj_grad_norm == pytest.approx(
            np.sqrt(np.sum(rep.per_block_norms ** 2)), rel=1e-12)
        # cross-check per-block assembly against direct block gradients
        for b in range(problem.s):
            sl = problem.partition.slice(b)
            g_b = problem.partial_gradient(x, b)
            pg_b = projected_gradient(x[sl], g_b)
            assert rep.per_block_norms[b] == pytest.approx(np.linalg.norm(pg_b), abs=1e-12)

    def test_zero_factor_point_flagged_degenerate(self):
        A, _, _ = generate_synthetic(6, 5, 2, seed=9)
        problem = NmfProblem(A, 2)
        rep = optimality_report(problem, np.zeros(problem.n))
        assert rep.proj_grad_norm == 0.0
        assert rep.degenerate


class TestStationarityEquivalence:
    def test_exact_quadratic_stationary_point(self):
        problem = SeparableQuadratic(
            np.array([1.0, -2.0, 0.5, 0.0]), sizes=[2, 2], curvatures=[2.0, 3.0])
        chk = stationarity_equivalence_check(problem, problem.solution(), tol=1e-8)
        assert chk.agree
        assert chk.norm_condition and chk.direction_condition and chk.fixed_point_condition

    def test_random_point_all_violated(self):
        A, _, _ = generate_synthetic(12, 10, 2, seed=5)
        problem = NmfProblem(A, 2)
        x = np.random.default_rng(7).uniform(0.2, 1.0, problem.n)
        chk = stationarity_equivalence_check(problem, x, tol=1e-6)
        assert chk.agree
        assert not (chk.norm_condition or chk.direction_condition or chk.fixed_point_condition)

    def test_boundary_with_inward_gradient(self):
        # at 0 with a positive target the gradient pulls inward: not stationary,
        # and all three certificates must say so together
        problem = SeparableQuadratic(np.array([2.0, 3.0]), sizes=[1, 1])
        chk = stationarity_equivalence_check(problem, np.zeros(2), tol=1e-6)
        assert chk.agree and not chk.norm_condition

    def test_rejects_bad_tol(self):
        problem = SeparableQuadratic(np.ones(2))
        with pytest.raises(ValueError):
            stationarity_equivalence_check(problem, np.ones(2), tol=0.0)
