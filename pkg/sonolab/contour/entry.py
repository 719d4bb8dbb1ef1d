import math

import numpy as np
from scipy.linalg import solve_triangular

import sonolab.constants as constants
from sonolab.errors import NonFiniteInput


class PolyCoeffs(object):
    """``y(t) = a0 + a1 t + a2 t^2`` with ``t`` in grid steps, ``t = 0`` at the 5% point."""

    def __init__(self, a0: float, a1: float, a2: float, rmse: float = 0.0, formant_index: int = 1):
        if not all(math.isfinite(value) for value in (a0, a1, a2, rmse)):
            raise NonFiniteInput('polynomial coefficients must be finite')
        if rmse < 0:
            raise NonFiniteInput('rmse must be nonnegative')
        self.a0 = float(a0)
        self.a1 = float(a1)
        self.a2 = float(a2)
        self.rmse = float(rmse)
        self.formant_index = formant_index

    def as_array(self) -> np.ndarray:
        return np.array([self.a0, self.a1, self.a2])

    def reversed(self, last=constants.N_GRID_POINTS - 1) -> 'PolyCoeffs':
        """Coefficients of ``y(last - t)``."""
        return PolyCoeffs(self.a0 + last * self.a1 + last * last * self.a2, -self.a1 - 2 * last * self.a2, self.a2,
                          self.rmse, self.formant_index)

    def to_dict(self) -> dict:
        prefix = 'f{0}_'.format(self.formant_index)
        return {prefix + 'a0': self.a0, prefix + 'a1': self.a1, prefix + 'a2': self.a2, prefix + 'rmse': self.rmse}


def grid_steps(n=constants.N_GRID_POINTS) -> np.ndarray:
    return np.arange(n, dtype=np.float64)


def design_matrix(t) -> np.ndarray:
    return np.vander(np.asarray(t, dtype=np.float64), 3, increasing=True)


def fit_quadratic(values, formant_index: int = 1) -> PolyCoeffs:
    y = np.asarray(values, dtype=np.float64)
    if y.ndim != 1 or y.size < 3:
        raise NonFiniteInput('need a contour of at least 3 values, got shape {0}'.format(y.shape))
    if not np.all(np.isfinite(y)):
        raise NonFiniteInput('contour contains non-finite values')
    x = design_matrix(grid_steps(y.size))
    q, r = np.linalg.qr(x)
    a = solve_triangular(r, q.T @ y)
    residuals = y - x @ a
    rmse = math.sqrt(float(np.dot(residuals, residuals)) / y.size)
    return PolyCoeffs(a[0], a[1], a[2], rmse, formant_index)


def eval_quadratic(coeffs: PolyCoeffs, t):
    return coeffs.a0 + coeffs.a1 * t + coeffs.a2 * t * t


def fit_track(track) -> list:
    """One ``PolyCoeffs`` per formant of a ``FormantTrack``."""
    return [fit_quadratic(track.formant(number), number) for number in range(1, constants.N_FORMANTS + 1)]
