import numpy as np
import pytest
from scipy.special import expit as scipy_expit

from drintegrate.numerics import SingularMatrix, expit, solve_linear


class TestSolveLinear:
    def test_matches_numpy_on_random_systems(self):
        rng = np.random.default_rng(0)
        for n in (1, 2, 5, 20, 60):
            a = rng.standard_normal((n, n)) + n * np.eye(n)
            b = rng.standard_normal(n)
            x = solve_linear(a, b)
            assert np.allclose(x, np.linalg.solve(a, b), atol=1e-10)

    def test_needs_row_pivoting(self):
        # zero leading pivot forces a row swap
        a = np.array([[0.0, 1.0], [1.0, 0.0]])
        b = np.array([2.0, 3.0])
        assert np.allclose(solve_linear(a, b), [3.0, 2.0])

    def test_singular_matrix_raises(self):
        a = np.array([[1.0, 2.0], [2.0, 4.0]])
        with pytest.raises(SingularMatrix):
            solve_linear(a, np.array([1.0, 1.0]))

    def test_zero_matrix_raises(self):
        with pytest.raises(SingularMatrix):
            solve_linear(np.zeros((3, 3)), np.zeros(3))

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            solve_linear(np.ones((2, 3)), np.ones(2))
        with pytest.raises(ValueError):
            solve_linear(np.eye(2), np.ones(3))

    def test_inputs_not_mutated(self):
        a = np.array([[2.0, 1.0], [1.0, 3.0]])
        b = np.array([1.0, 2.0])
        a0, b0 = a.copy(), b.copy()
        solve_linear(a, b)
        assert np.array_equal(a, a0) and np.array_equal(b, b0)


class TestExpit:
    def test_matches_scipy(self):
        t = np.linspace(-40, 40, 401)
        assert np.allclose(expit(t), scipy_expit(t), atol=1e-15)

    def test_scalar_returns_float(self):
        out = expit(0.3)
        assert isinstance(out, float)
        assert out == pytest.approx(scipy_expit(0.3))

    def test_extreme_arguments_do_not_overflow(self):
        with np.errstate(over="raise"):
            assert expit(800.0) == 1.0
            assert expit(-800.0) == 0.0

    def test_symmetry(self):
        t = np.array([-3.0, -0.5, 0.0, 0.5, 3.0])
        assert np.allclose(expit(t) + expit(-t), 1.0, atol=1e-15)
