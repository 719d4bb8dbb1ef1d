import math

import numpy as np
import pytest

import sonolab.constants as constants
from sonolab.classify.entry import ClassifierModel, feature_value, feature_matrix, target_vector, loss_and_gradient, \
    hessian, train_arrays, train, predict, accuracy, stratified_folds, cross_validate, DEFAULT_FEATURES
from sonolab.errors import SingleClassInput, NonFiniteFeature, MissingFeature, TooFewRecords, ClassifierError
from sonolab.stats.entry import FeatureFields, INTERCEPT
from sonolab.synthkit.entry import synth_corpus

M2_FEATURE = ('log_' + FeatureFields.M2_FIELD,)


def _blobs(rng, n=100, separation=3.0, spread=0.5):
    x = np.concatenate([rng.normal(-separation, spread, (n, 2)), rng.normal(separation, spread, (n, 2))])
    y = np.concatenate([np.zeros(n), np.ones(n)])
    return x, y


def _overlapping(rng, n=150):
    x = rng.standard_normal((2 * n, 3))
    y = (x[:, 0] + 0.5 * x[:, 1] + rng.standard_normal(2 * n) > 0).astype(float)
    return x, y


class TestLoss:
    def test_zero_weights_predict_one_half(self):
        model = ClassifierModel(('a', 'b'), [0.0, 0.0], [1.0, 1.0], np.zeros(3), 1e-3)
        np.testing.assert_allclose(model.probabilities(np.array([[1.0, -4.0], [30.0, 2.0]])), 0.5)

    def test_gradient_matches_finite_differences(self, rng):
        x, y = _overlapping(rng, 20)
        weights = rng.standard_normal(4)
        _, gradient = loss_and_gradient(weights, x, y, 0.1)
        h = 1e-5
        numeric = np.empty_like(weights)
        for i in range(weights.size):
            step = np.zeros_like(weights)
            step[i] = h
            numeric[i] = (loss_and_gradient(weights + step, x, y, 0.1)[0] -
                          loss_and_gradient(weights - step, x, y, 0.1)[0]) / (2.0 * h)
        np.testing.assert_allclose(gradient, numeric, rtol=1e-5, atol=1e-8)

    def test_hessian_matches_finite_differences(self, rng):
        x, y = _overlapping(rng, 20)
        weights = rng.standard_normal(4)
        h = 1e-6
        numeric = np.empty((4, 4))
        for i in range(4):
            step = np.zeros(4)
            step[i] = h
            numeric[:, i] = (loss_and_gradient(weights + step, x, y, 0.1)[1] -
                             loss_and_gradient(weights - step, x, y, 0.1)[1]) / (2.0 * h)
        np.testing.assert_allclose(hessian(weights, x, y, 0.1), numeric, rtol=1e-5, atol=1e-8)

    def test_bias_not_penalized(self, rng):
        x, y = _overlapping(rng, 10)
        weights = np.array([0.5, -1.0, 0.25, 2.0])
        small_loss, small = loss_and_gradient(weights, x, y, 0.0)
        large_loss, large = loss_and_gradient(weights, x, y, 10.0)
        assert large_loss - small_loss == pytest.approx(5.0 * np.dot(weights[:-1], weights[:-1]))
        assert small[-1] == large[-1]


class TestTraining:
    def test_separable_data(self, rng):
        x, y = _blobs(rng)
        model = train_arrays(x, y, ('a', 'b'), l2_lambda=1e-4)
        assert accuracy(model, x, y) >= 0.99

    def test_label_swap_negates_weights(self, rng):
        x, y = _overlapping(rng)
        model = train_arrays(x, y, ('a', 'b', 'c'), l2_lambda=0.1, tol=1e-10)
        swapped = train_arrays(x, 1.0 - y, ('a', 'b', 'c'), l2_lambda=0.1, tol=1e-10)
        assert model.converged and swapped.converged
        assert model.iterations < 50
        np.testing.assert_allclose(swapped.weights, model.negated().weights, rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(swapped.probabilities(x), 1.0 - model.probabilities(x), atol=1e-8)

    def test_row_order_does_not_matter(self, rng):
        x, y = _overlapping(rng)
        order = rng.permutation(y.size)
        model = train_arrays(x, y, ('a', 'b', 'c'))
        shuffled = train_arrays(x[order], y[order], ('a', 'b', 'c'))
        np.testing.assert_array_equal(model.weights, shuffled.weights)
        np.testing.assert_array_equal(model.means, shuffled.means)

    def test_unique_optimum(self, rng):
        x, y = _overlapping(rng)
        first = train_arrays(x, y, ('a', 'b', 'c'), l2_lambda=0.1, tol=1e-10)
        second = train_arrays(x, y, ('a', 'b', 'c'), l2_lambda=0.1, tol=1e-10, initial=rng.normal(0.0, 3.0, 4))
        np.testing.assert_allclose(first.weights, second.weights, atol=1e-6)

    def test_constant_feature(self, rng):
        x, y = _overlapping(rng)
        x[:, 2] = 7.0
        model = train_arrays(x, y, ('a', 'b', 'c'))
        assert model.means[2] == 7.0
        assert model.sds[2] == 1.0
        assert model.weights[2] == pytest.approx(0.0, abs=1e-6)

    def test_single_class(self, rng):
        x = rng.standard_normal((10, 2))
        with pytest.raises(SingleClassInput):
            train_arrays(x, np.ones(10), ('a', 'b'))

    def test_non_finite(self, rng):
        x, y = _overlapping(rng, 5)
        x[3, 1] = np.inf
        with pytest.raises(NonFiniteFeature):
            train_arrays(x, y, ('a', 'b', 'c'))

    def test_train_on_records(self):
        records, _ = synth_corpus(n_per_cell=8, seed=21)
        model = train(records)
        assert model.features == DEFAULT_FEATURES
        x = feature_matrix(records, DEFAULT_FEATURES)
        assert accuracy(model, x, target_vector(records)) >= 0.95
        probability, label = predict(model, records[-1])
        assert label == records[-1].variety
        assert 0.0 <= probability <= 1.0


class TestFeatures:
    def test_log_prefix(self, make_record):
        record = make_record()
        assert feature_value(record, 'log_m1_cog_hz') == pytest.approx(math.log(800.0))
        assert feature_value({'m3_skew': '2.5'}, 'm3_skew') == 2.5

    def test_missing(self):
        with pytest.raises(MissingFeature):
            feature_value({'m3_skew': 1.0}, 'm4_kurt')

    def test_log_of_non_positive(self, make_record):
        with pytest.raises(NonFiniteFeature):
            feature_value(make_record(m3_skew=-1.0), 'log_m3_skew')

    def test_targets(self, make_record):
        records = [make_record(), make_record(variety=constants.CG)]
        assert target_vector(records).tolist() == [0.0, 1.0]


class TestModelDocument:
    def test_round_trip(self, rng):
        x, y = _overlapping(rng)
        model = train_arrays(x, y, ('a', 'b', 'c'), seed=4)
        restored = ClassifierModel.from_dict(model.to_dict())
        np.testing.assert_array_equal(restored.probabilities(x), model.probabilities(x))
        assert restored.seed == 4
        assert model.to_dict()['positive_class'] == constants.CG

    def test_incomplete_document(self):
        with pytest.raises(ClassifierError):
            ClassifierModel.from_dict({'features': ['a'], 'means': [0.0]})

    def test_bad_standardization(self):
        with pytest.raises(ClassifierError):
            ClassifierModel(('a',), [0.0], [0.0], [1.0, 0.0], 1e-3)


def _variety_corpus(seed, n=200):
    design = [{'variety': constants.AG}, {'variety': constants.CG}]
    effects = {FeatureFields.M2_FIELD: {INTERCEPT: 6.56, constants.CG: 0.25}}
    return synth_corpus(design=design, effects=effects, noise_sd={FeatureFields.M2_FIELD: 0.4}, n_per_cell=n,
                        seed=seed)[0]


class TestCrossValidation:
    def test_planted_effect_is_detected(self):
        result = cross_validate(_variety_corpus(seed=2), k=5, seed=0, features=M2_FEATURE)
        assert len(result.accuracies) == 5
        assert result.mean_accuracy > 0.55

    def test_shuffled_labels_are_at_chance(self, rng):
        records = [{'variety': str(rng.choice([constants.AG, constants.CG])),
                    FeatureFields.M2_FIELD: float(np.exp(rng.normal(6.5, 0.4)))} for _ in range(1000)]
        result = cross_validate(records, k=5, seed=0, features=M2_FEATURE)
        assert abs(result.mean_accuracy - 0.5) <= 0.075

    def test_deterministic(self):
        records = _variety_corpus(seed=5, n=40)
        first = cross_validate(records, k=4, seed=9, features=M2_FEATURE)
        second = cross_validate(records, k=4, seed=9, features=M2_FEATURE)
        assert first.accuracies == second.accuracies
        np.testing.assert_array_equal(first.folds, second.folds)

    def test_folds_partition_each_class(self):
        y = np.array([0.0] * 23 + [1.0] * 17)
        folds = stratified_folds(y, 5, seed=1)
        assert set(folds.tolist()) == set(range(5))
        for label in (0.0, 1.0):
            counts = np.bincount(folds[y == label], minlength=5)
            assert counts.max() - counts.min() <= 1

    def test_models_trained_without_test_fold(self):
        records = _variety_corpus(seed=6, n=30)
        result = cross_validate(records, k=3, seed=1, features=M2_FEATURE)
        x = feature_matrix(records, M2_FEATURE)
        for fold, model in enumerate(result.models):
            train_rows = x[result.folds != fold]
            assert model.means[0] == pytest.approx(train_rows[:, 0].mean(), rel=1e-12)

    def test_too_few_folds(self):
        with pytest.raises(TooFewRecords):
            cross_validate(_variety_corpus(seed=1, n=10), k=1, features=M2_FEATURE)

    def test_class_smaller_than_k(self):
        with pytest.raises(TooFewRecords):
            cross_validate(_variety_corpus(seed=1, n=3), k=5, features=M2_FEATURE)

    def test_single_class(self, make_record):
        with pytest.raises(SingleClassInput):
            cross_validate([make_record() for _ in range(10)], k=2, features=M2_FEATURE)
