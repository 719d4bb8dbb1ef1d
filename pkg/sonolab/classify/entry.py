import logging
import math
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import expit

import sonolab.constants as constants
from sonolab.errors import SingleClassInput, NonFiniteFeature, MissingFeature, TooFewRecords, ClassifierError
from sonolab.stats.entry import FeatureFields
from sonolab.utils.utils import make_rng

logger = logging.getLogger(__name__)

LOG_PREFIX = 'log_'
POSITIVE_CLASS = constants.CG
NEGATIVE_CLASS = constants.AG
ARMIJO_FRACTION = 1e-4
MIN_STEP = 1e-20
LOSS_RESOLUTION = 1e-12

DEFAULT_FEATURES = tuple(LOG_PREFIX + name for name in (FeatureFields.DURATION_FIELD, FeatureFields.M1_FIELD,
                                                        FeatureFields.M2_FIELD)) + \
                   (FeatureFields.M3_FIELD, FeatureFields.M4_FIELD) + FeatureFields.COEFFICIENTS


def feature_value(record, name: str) -> float:
    """Reads ``name`` from a record; ``log_<field>`` is the natural log of ``<field>``."""
    field = name[len(LOG_PREFIX):] if name.startswith(LOG_PREFIX) else name
    value = record.get(field) if isinstance(record, dict) else getattr(record, field, None)
    if value is None:
        raise MissingFeature('record has no value for {0!r}'.format(field))
    value = float(value)
    if name.startswith(LOG_PREFIX):
        if not value > 0:
            raise NonFiniteFeature('{0}: log of non-positive value {1}'.format(name, value))
        value = math.log(value)
    if not math.isfinite(value):
        raise NonFiniteFeature('{0} is not finite'.format(name))
    return value


def feature_matrix(records, features: Sequence[str]) -> np.ndarray:
    return np.array([[feature_value(record, name) for name in features] for record in records],
                    dtype=np.float64).reshape(len(records), len(features))


def target_vector(records) -> np.ndarray:
    labels = [record.get('variety') if isinstance(record, dict) else record.variety for record in records]
    return np.array([1.0 if label == POSITIVE_CLASS else 0.0 for label in labels])


def loss_and_gradient(weights: np.ndarray, x: np.ndarray, y: np.ndarray, l2_lambda: float) -> tuple:
    """Mean negative log-likelihood plus ``l2_lambda / 2 * |w|^2``; the bias (last weight) is not penalized."""
    z = x @ weights[:-1] + weights[-1]
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * l2_lambda * float(np.dot(weights[:-1],
                                                                                       weights[:-1]))
    residual = expit(z) - y
    gradient = np.empty_like(weights)
    gradient[:-1] = x.T @ residual / y.size + l2_lambda * weights[:-1]
    gradient[-1] = residual.mean()
    return loss, gradient


def hessian(weights: np.ndarray, x: np.ndarray, y: np.ndarray, l2_lambda: float) -> np.ndarray:
    """Second derivatives of the ``loss_and_gradient`` loss, bias last."""
    p = expit(x @ weights[:-1] + weights[-1])
    augmented = np.column_stack([x, np.ones(y.size)])
    result = augmented.T @ (augmented * (p * (1.0 - p))[:, None]) / y.size
    result[:-1, :-1] += l2_lambda * np.eye(x.shape[1])
    return result


def _newton_direction(curvature: np.ndarray, gradient: np.ndarray) -> np.ndarray:
    try:
        direction = -np.linalg.solve(curvature, gradient)
    except np.linalg.LinAlgError:
        return -gradient
    if not np.all(np.isfinite(direction)) or np.dot(gradient, direction) >= 0:
        return -gradient
    return direction


def descend(x: np.ndarray, y: np.ndarray, l2_lambda: float, tol: float, max_iter: int,
            initial: Optional[np.ndarray] = None) -> tuple:
    """Damped Newton descent with Armijo backtracking; returns ``(weights, iterations, loss, converged)``.

    Falls back to the negative gradient where the Hessian solve fails.
    """
    weights = np.zeros(x.shape[1] + 1) if initial is None else np.array(initial, dtype=np.float64)
    loss, gradient = loss_and_gradient(weights, x, y, l2_lambda)
    for iteration in range(max_iter):
        largest = float(np.max(np.abs(gradient)))
        if largest < tol:
            return weights, iteration, loss, True
        direction = _newton_direction(hessian(weights, x, y, l2_lambda), gradient)
        slope = float(np.dot(gradient, direction))
        step = 1.0
        while True:
            candidate = weights + step * direction
            candidate_loss, candidate_gradient = loss_and_gradient(candidate, x, y, l2_lambda)
            if candidate_loss <= loss + ARMIJO_FRACTION * step * slope:
                break
            # loss changes below its rounding resolution; the gradient still orders the iterates
            if candidate_loss <= loss + LOSS_RESOLUTION * max(1.0, abs(loss)) and \
                    float(np.max(np.abs(candidate_gradient))) < largest:
                break
            step *= 0.5
            if step < MIN_STEP:
                logger.warning('line search stalled at iteration %d, loss %.12g', iteration, loss)
                return weights, iteration, loss, False
        weights, loss, gradient = candidate, candidate_loss, candidate_gradient
    converged = bool(np.max(np.abs(gradient)) < tol)
    if not converged:
        logger.warning('no convergence after %d iterations, gradient norm %.3g', max_iter,
                       float(np.max(np.abs(gradient))))
    return weights, max_iter, loss, converged


class ClassifierModel(object):
    """Standardized logistic regression; ``weights`` holds one weight per feature then the bias."""

    def __init__(self, features: Sequence[str], means, sds, weights, l2_lambda: float, iterations: int = 0,
                 final_loss: float = float('nan'), converged: bool = True, seed: Optional[int] = None):
        means = np.asarray(means, dtype=np.float64)
        sds = np.asarray(sds, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        if weights.size != len(features) + 1:
            raise ClassifierError('{0} weights for {1} features'.format(weights.size, len(features)))
        if means.size != len(features) or sds.size != len(features):
            raise ClassifierError('standardization does not match the feature count')
        if np.any(~(sds > 0)):
            raise ClassifierError('standardization sds must be positive')
        self.features = tuple(features)
        self.means = means
        self.sds = sds
        self.weights = weights
        self.l2_lambda = float(l2_lambda)
        self.iterations = int(iterations)
        self.final_loss = float(final_loss)
        self.converged = bool(converged)
        self.seed = seed

    @property
    def bias(self) -> float:
        return float(self.weights[-1])

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.means) / self.sds

    def probabilities(self, x: np.ndarray) -> np.ndarray:
        return expit(self.standardize(x) @ self.weights[:-1] + self.weights[-1])

    def negated(self) -> 'ClassifierModel':
        return ClassifierModel(self.features, self.means, self.sds, -self.weights, self.l2_lambda, self.iterations,
                               self.final_loss, self.converged, self.seed)

    def to_dict(self) -> dict:
        return {'positive_class': POSITIVE_CLASS, 'features': list(self.features),
                'means': [float(value) for value in self.means], 'sds': [float(value) for value in self.sds],
                'weights': [float(value) for value in self.weights[:-1]], 'bias': self.bias,
                'l2_lambda': self.l2_lambda, 'iterations': self.iterations, 'final_loss': self.final_loss,
                'converged': self.converged, 'seed': self.seed}

    @classmethod
    def from_dict(cls, data: dict) -> 'ClassifierModel':
        try:
            weights = list(data['weights']) + [data['bias']]
            return cls(data['features'], data['means'], data['sds'], weights, data['l2_lambda'],
                       data.get('iterations', 0), data.get('final_loss', float('nan')), data.get('converged', True),
                       data.get('seed'))
        except KeyError as ex:
            raise ClassifierError('model document lacks {0}'.format(ex))


def _canonical_order(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    keys = np.column_stack([y, x])
    return np.lexsort(keys.T[::-1])


def train_arrays(x, y, features: Sequence[str], l2_lambda=constants.DEFAULT_L2_LAMBDA,
                 tol=constants.DEFAULT_TOLERANCE, max_iter=constants.DEFAULT_MAX_ITERATIONS,
                 initial=None, seed: Optional[int] = None) -> ClassifierModel:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NonFiniteFeature('feature matrix contains non-finite values')
    if y.size == 0 or np.all(y == y[0]):
        raise SingleClassInput('training needs both {0} and {1} records'.format(NEGATIVE_CLASS, POSITIVE_CLASS))
    # row order must not change the reduction sums
    order = _canonical_order(x, y)
    x = x[order]
    y = y[order]
    means = x.mean(axis=0)
    sds = x.std(axis=0)
    sds[sds == 0] = 1.0
    weights, iterations, loss, converged = descend((x - means) / sds, y, l2_lambda, tol, max_iter, initial)
    logger.info('trained on %d records, %d features: %d iterations, loss %.6g', y.size, len(features), iterations,
                loss)
    return ClassifierModel(features, means, sds, weights, l2_lambda, iterations, loss, converged, seed)


def train(records, features: Sequence[str] = DEFAULT_FEATURES, l2_lambda=constants.DEFAULT_L2_LAMBDA,
          tol=constants.DEFAULT_TOLERANCE, max_iter=constants.DEFAULT_MAX_ITERATIONS,
          seed: Optional[int] = None) -> ClassifierModel:
    return train_arrays(feature_matrix(records, features), target_vector(records), features, l2_lambda, tol,
                        max_iter, seed=seed)


def predict(model: ClassifierModel, record) -> tuple:
    """``(probability of CG, predicted label)``."""
    x = np.array([feature_value(record, name) for name in model.features])
    probability = float(model.probabilities(x[np.newaxis, :])[0])
    return probability, POSITIVE_CLASS if probability >= 0.5 else NEGATIVE_CLASS


def accuracy(model: ClassifierModel, x: np.ndarray, y: np.ndarray) -> float:
    predicted = (model.probabilities(x) >= 0.5).astype(float)
    return float(np.mean(predicted == y))


def stratified_folds(y: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Fold index per record; each class is shuffled then dealt round-robin."""
    rng = make_rng(seed)
    folds = np.empty(y.size, dtype=int)
    for label in (0.0, 1.0):
        members = np.flatnonzero(y == label)
        shuffled = members[rng.permutation(members.size)]
        folds[shuffled] = np.arange(shuffled.size) % k
    return folds


class CrossValidation(object):
    def __init__(self, folds: np.ndarray, accuracies: List[float], models: List[ClassifierModel]):
        self.folds = folds
        self.accuracies = accuracies
        self.models = models

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    def to_dict(self) -> dict:
        return {'folds': len(self.accuracies), 'fold_accuracy': [float(value) for value in self.accuracies],
                'mean_accuracy': self.mean_accuracy}


def cross_validate(records, k=constants.DEFAULT_FOLDS, seed=0, features: Sequence[str] = DEFAULT_FEATURES,
                   l2_lambda=constants.DEFAULT_L2_LAMBDA, tol=constants.DEFAULT_TOLERANCE,
                   max_iter=constants.DEFAULT_MAX_ITERATIONS) -> CrossValidation:
    if k < 2:
        raise TooFewRecords('cross-validation needs at least 2 folds, got {0}'.format(k))
    x = feature_matrix(records, features)
    y = target_vector(records)
    counts = [int(np.sum(y == label)) for label in (0.0, 1.0)]
    if min(counts) == 0:
        raise SingleClassInput('cross-validation needs both classes')
    if min(counts) < k:
        raise TooFewRecords('{0} folds need at least {0} records per class, got {1}'.format(k, counts))

    folds = stratified_folds(y, k, seed)
    accuracies = []
    models = []
    for fold in range(k):
        test = folds == fold
        model = train_arrays(x[~test], y[~test], features, l2_lambda, tol, max_iter, seed=seed)
        accuracies.append(accuracy(model, x[test], y[test]))
        models.append(model)
        logger.debug('fold %d: %d test records, accuracy %.4f', fold, int(test.sum()), accuracies[-1])
    return CrossValidation(folds, accuracies, models)
