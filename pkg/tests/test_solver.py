import numpy as np
import pytest

from swarmdock.oracles import QuadraticBoxProblem, enumerate_box_qp, random_box_qp
from swarmdock.solver import (
    BoxBounds,
    DecisionVector,
    SolverConfig,
    project_box,
    solve,
)


class RecordingQP(QuadraticBoxProblem):
    """QP that records every point the solver evaluates."""

    def __init__(self, hessian, linear, bounds):
        object.__setattr__(self, "hessian", hessian)
        object.__setattr__(self, "linear", linear)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "visited", [])

    def objective_grad(self, z, rho):
        self.visited.append(z.copy())
        return super().objective_grad(z, rho)


class PenalizedScalar:
    """min (z-0.5)^2 subject to z >= 2, constraint via the penalty loop."""

    bounds = BoxBounds(np.array([-10.0]), np.array([10.0]))

    def objective_grad(self, z, rho):
        gap = max(0.0, 2.0 - z[0])
        val = (z[0] - 0.5) ** 2 + rho * gap * gap
        grad = np.array([2.0 * (z[0] - 0.5) - 2.0 * rho * gap])
        return val, grad

    def constraint_violation(self, z):
        return max(0.0, 2.0 - z[0])


def test_project_box():
    b = BoxBounds(np.array([-1.0, 0.0]), np.array([1.0, 2.0]))
    assert np.allclose(project_box(np.array([-5.0, 5.0]), b), [-1.0, 2.0])
    assert np.allclose(project_box(np.array([0.5, 1.0]), b), [0.5, 1.0])


def test_bounds_validation():
    with pytest.raises(ValueError):
        BoxBounds(np.array([1.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        BoxBounds(np.zeros(2), np.zeros(3))


def test_decision_vector_round_trip():
    rng = np.random.default_rng(0)
    u = rng.normal(size=(3, 7, 6))
    d = DecisionVector.from_inputs(u)
    assert d.z.shape == (3 * 7 * 6,)
    assert np.allclose(d.as_inputs(), u)
    with pytest.raises(ValueError):
        DecisionVector(np.zeros(5), 3, 7)


def test_matches_enumeration_oracle():
    rng = np.random.default_rng(123)
    cfg = SolverConfig(tolerance=1e-10, max_inner_iterations=2000)
    for _ in range(8):
        dim = int(rng.integers(3, 7))
        hessian, linear, lower, upper = random_box_qp(rng, dim)
        exact = enumerate_box_qp(hessian, linear, lower, upper)
        problem = QuadraticBoxProblem(hessian, linear, BoxBounds(lower, upper))
        z, report = solve(problem, np.zeros(dim), cfg)
        assert report.converged
        assert np.max(np.abs(z - exact)) < 1e-6


def test_all_iterates_stay_in_box():
    rng = np.random.default_rng(5)
    hessian, linear, lower, upper = random_box_qp(rng, 5)
    problem = RecordingQP(hessian, linear, BoxBounds(lower, upper))
    z0 = rng.normal(size=5) * 10.0  # start far outside
    solve(problem, z0, SolverConfig())
    assert problem.visited, "solver never evaluated the objective"
    for z in problem.visited:
        assert np.all(z >= lower - 1e-12)
        assert np.all(z <= upper + 1e-12)


def test_penalty_weights_only_increase():
    problem = PenalizedScalar()
    z, report = solve(problem, np.zeros(1), SolverConfig())
    hist = report.penalty_history
    assert len(hist) > 1
    assert all(b > a for a, b in zip(hist, hist[1:]))
    assert report.max_violation <= 1e-3
    assert report.outer_iterations == len(hist)
    assert z[0] == pytest.approx(2.0, abs=2e-3)


def test_deterministic_given_same_start():
    rng = np.random.default_rng(9)
    hessian, linear, lower, upper = random_box_qp(rng, 6)
    problem = QuadraticBoxProblem(hessian, linear, BoxBounds(lower, upper))
    z0 = rng.normal(size=6)
    z1, rep1 = solve(problem, z0.copy(), SolverConfig())
    z2, rep2 = solve(problem, z0.copy(), SolverConfig())
    assert np.array_equal(z1, z2)
    assert rep1.deterministic_fields() == rep2.deterministic_fields()


def test_converges_to_interior_optimum():
    # unconstrained optimum inside the box: solution is -H^-1 g
    rng = np.random.default_rng(11)
    a = rng.normal(size=(4, 4))
    hessian = a @ a.T + 1.0 * np.eye(4)
    linear = 0.1 * rng.normal(size=4)
    exact = -np.linalg.solve(hessian, linear)
    bounds = BoxBounds(exact - 5.0, exact + 5.0)
    problem = QuadraticBoxProblem(hessian, linear, bounds)
    z, report = solve(problem, exact + 3.0, SolverConfig(tolerance=1e-10))
    assert report.converged
    assert report.outer_iterations == 1  # no constraint violation, single pass
    assert np.max(np.abs(z - exact)) < 1e-8


def test_report_counts_evaluations():
    rng = np.random.default_rng(13)
    hessian, linear, lower, upper = random_box_qp(rng, 4)
    problem = RecordingQP(hessian, linear, BoxBounds(lower, upper))
    _, report = solve(problem, np.zeros(4), SolverConfig())
    assert report.function_evaluations == len(problem.visited)
    assert report.inner_iterations > 0
