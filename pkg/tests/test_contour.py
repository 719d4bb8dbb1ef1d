import numpy as np
import pytest

from sonolab.contour.entry import PolyCoeffs, fit_quadratic, eval_quadratic, fit_track, grid_steps, design_matrix
from sonolab.errors import NonFiniteInput
from sonolab.formants.entry import FormantTrack

T = grid_steps()


def test_constant_contour():
    coeffs = fit_quadratic(np.full(19, 500.0))
    assert coeffs.a0 == pytest.approx(500.0, rel=1e-12)
    assert coeffs.a1 == pytest.approx(0.0, abs=1e-9)
    assert coeffs.a2 == pytest.approx(0.0, abs=1e-9)
    assert coeffs.rmse == pytest.approx(0.0, abs=1e-9)


def test_exact_quadratic():
    coeffs = fit_quadratic(400.0 + 10.0 * T - 0.5 * T ** 2)
    assert coeffs.as_array() == pytest.approx([400.0, 10.0, -0.5], rel=1e-9)
    assert coeffs.rmse < 1e-9
    np.testing.assert_allclose(eval_quadratic(coeffs, T), 400.0 + 10.0 * T - 0.5 * T ** 2, atol=1e-9)


def test_residuals_orthogonal_to_design():
    y = np.sin(T)
    coeffs = fit_quadratic(y)
    x = design_matrix(T)
    residuals = y - x @ coeffs.as_array()
    assert np.all(np.abs(x.T @ residuals) < 1e-8 * np.linalg.norm(y))

    normal = np.linalg.solve(x.T @ x, x.T @ y)
    np.testing.assert_allclose(coeffs.as_array(), normal, atol=1e-8)


def test_least_squares_optimality(rng):
    y = 700.0 + 30.0 * rng.standard_normal(19)
    coeffs = fit_quadratic(y)
    best = np.sum((y - eval_quadratic(coeffs, T)) ** 2)
    for _ in range(20):
        other = PolyCoeffs(*(coeffs.as_array() + 1e-3 * rng.standard_normal(3)))
        assert np.sum((y - eval_quadratic(other, T)) ** 2) >= best


def test_adding_constant_shifts_intercept(rng):
    y = 1200.0 + 50.0 * rng.standard_normal(19)
    base = fit_quadratic(y)
    shifted = fit_quadratic(y + 100.0)
    assert shifted.a0 - base.a0 == pytest.approx(100.0, rel=1e-9)
    assert shifted.a1 == pytest.approx(base.a1, abs=1e-9)
    assert shifted.a2 == pytest.approx(base.a2, abs=1e-9)


def test_reversal(rng):
    y = 2500.0 + 80.0 * rng.standard_normal(19)
    forward = fit_quadratic(y)
    backward = fit_quadratic(y[::-1])
    assert backward.as_array() == pytest.approx(forward.reversed().as_array(), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize('t', [0.0, 4.5, 18.0])
def test_eval(t):
    assert eval_quadratic(PolyCoeffs(500.0, 0.0, 0.0), t) == 500.0


def test_eval_arithmetic():
    assert eval_quadratic(PolyCoeffs(400.0, 10.0, -0.5), 18.0) == pytest.approx(418.0)


def test_non_finite_input():
    y = np.full(19, 500.0)
    y[4] = np.nan
    with pytest.raises(NonFiniteInput):
        fit_quadratic(y)


def test_fit_track():
    columns = [300.0 + 5.0 * T, 1500.0 - 2.0 * T + 0.1 * T ** 2, np.full(19, 2500.0), 3500.0 + T]
    coefficients = fit_track(FormantTrack(np.column_stack(columns)))
    assert [c.formant_index for c in coefficients] == [1, 2, 3, 4]
    assert coefficients[1].as_array() == pytest.approx([1500.0, -2.0, 0.1], rel=1e-9)
    record = coefficients[0].to_dict()
    assert set(record) == {'f1_a0', 'f1_a1', 'f1_a2', 'f1_rmse'}
    assert record['f1_a1'] == pytest.approx(5.0)
