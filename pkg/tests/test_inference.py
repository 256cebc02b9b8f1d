import numpy as np
import pytest

from minipfn.data import FeatureStats, TargetStats
from minipfn.errors import AllValuesEqualError, FeatureDimensionMismatchError
from minipfn.inference import bin_distributions, fit_context, predict, predict_all_tasks
from minipfn.model import ModelConfig, init_params

MODEL = ModelConfig(embed_dim=16, n_blocks=1, n_heads=2, ff_dim=24, k_bins=8, max_features=8)


def setup_case(seed=0, n=40, d=4, m=12):
    rng = np.random.default_rng(seed)
    x_train = rng.normal(size=(n, d)) * 2 + 1
    y_train = rng.normal(size=n) * 10 + 100
    x_test = rng.normal(size=(m, d)) * 2 + 1
    feat_stats = FeatureStats(mean=x_train.mean(axis=0), std=x_train.std(axis=0))
    params = init_params(MODEL, seed)
    # nonzero head so predictions are input-dependent
    params["out.w"] = 0.05 * rng.normal(size=params["out.w"].shape)
    return params, x_train, y_train, x_test, feat_stats


class TestFitContext:
    def test_params_not_mutated(self):
        params, x_train, y_train, _, feat_stats = setup_case()
        before = {k: v.copy() for k, v in params.items()}
        fit_context(params, MODEL, x_train, y_train, feat_stats, y_train.mean(), y_train.std())
        for name in params:
            np.testing.assert_array_equal(params[name], before[name])

    def test_deterministic(self):
        params, x_train, y_train, _, feat_stats = setup_case()
        a = fit_context(params, MODEL, x_train, y_train, feat_stats, y_train.mean(), y_train.std())
        b = fit_context(params, MODEL, x_train, y_train, feat_stats, y_train.mean(), y_train.std())
        np.testing.assert_array_equal(a.x_ctx_std, b.x_ctx_std)
        np.testing.assert_array_equal(a.support.centers, b.support.centers)

    def test_single_row_rejected(self):
        params, x_train, y_train, _, feat_stats = setup_case()
        with pytest.raises(ValueError):
            fit_context(params, MODEL, x_train[:1], y_train[:1], feat_stats, 0.0, 1.0)

    def test_constant_targets_rejected(self):
        params, x_train, _, _, feat_stats = setup_case()
        with pytest.raises(AllValuesEqualError):
            fit_context(params, MODEL, x_train, np.full(40, 7.0), feat_stats, 7.0, 1.0)

    def test_context_cap_subsamples_deterministically(self):
        params, x_train, y_train, _, feat_stats = setup_case()
        a = fit_context(params, MODEL, x_train, y_train, feat_stats, 100.0, 10.0, context_cap=16, seed=5)
        b = fit_context(params, MODEL, x_train, y_train, feat_stats, 100.0, 10.0, context_cap=16, seed=5)
        assert a.x_ctx_std.shape[0] == 16
        np.testing.assert_array_equal(a.x_ctx_std, b.x_ctx_std)
        c = fit_context(params, MODEL, x_train, y_train, feat_stats, 100.0, 10.0, context_cap=16, seed=6)
        assert not np.array_equal(a.x_ctx_std, c.x_ctx_std)


class TestPredict:
    def test_empty_query(self):
        params, x_train, y_train, _, feat_stats = setup_case()
        pred = fit_context(params, MODEL, x_train, y_train, feat_stats, y_train.mean(), y_train.std())
        out = predict(pred, np.empty((0, 4)))
        assert out.shape == (0,)

    def test_feature_mismatch(self):
        params, x_train, y_train, x_test, feat_stats = setup_case()
        pred = fit_context(params, MODEL, x_train, y_train, feat_stats, y_train.mean(), y_train.std())
        with pytest.raises(FeatureDimensionMismatchError):
            predict(pred, x_test[:, :3])

    def test_predictions_within_destandardized_support(self):
        params, x_train, y_train, x_test, feat_stats = setup_case()
        mean, std = y_train.mean(), y_train.std()
        pred = fit_context(params, MODEL, x_train, y_train, feat_stats, mean, std)
        out = predict(pred, x_test)
        lo = pred.support.centers[0] * std + mean
        hi = pred.support.centers[-1] * std + mean
        assert np.all(out >= lo - 1e-9) and np.all(out <= hi + 1e-9)

    def test_duplicate_test_row_duplicates_prediction(self):
        params, x_train, y_train, x_test, feat_stats = setup_case()
        pred = fit_context(params, MODEL, x_train, y_train, feat_stats, y_train.mean(), y_train.std())
        dup = np.vstack([x_test, x_test[3:4]])
        out = predict(pred, dup)
        assert out[-1] == out[3]

    def test_chunking_does_not_change_results(self):
        params, x_train, y_train, x_test, feat_stats = setup_case(m=23)
        pred = fit_context(params, MODEL, x_train, y_train, feat_stats, y_train.mean(), y_train.std())
        whole = predict(pred, x_test, query_chunk=1024)
        pieces = predict(pred, x_test, query_chunk=5)
        np.testing.assert_array_equal(whole, pieces)

    def test_train_row_order_invariance_end_to_end(self):
        params, x_train, y_train, x_test, feat_stats = setup_case()
        rng = np.random.default_rng(1)
        pred = fit_context(params, MODEL, x_train, y_train, feat_stats, y_train.mean(), y_train.std())
        base = predict(pred, x_test)
        perm = rng.permutation(x_train.shape[0])
        pred2 = fit_context(params, MODEL, x_train[perm], y_train[perm], feat_stats, y_train.mean(), y_train.std())
        assert np.abs(predict(pred2, x_test) - base).max() <= 1e-6

    def test_feature_order_invariance_end_to_end(self):
        params, x_train, y_train, x_test, feat_stats = setup_case()
        rng = np.random.default_rng(2)
        pred = fit_context(params, MODEL, x_train, y_train, feat_stats, y_train.mean(), y_train.std())
        base = predict(pred, x_test)
        perm = rng.permutation(x_train.shape[1])
        stats_p = FeatureStats(mean=feat_stats.mean[perm], std=feat_stats.std[perm])
        pred2 = fit_context(params, MODEL, x_train[:, perm], y_train, stats_p, y_train.mean(), y_train.std())
        assert np.abs(predict(pred2, x_test[:, perm]) - base).max() <= 1e-6

    def test_bin_distributions_shape_and_simplex(self):
        params, x_train, y_train, x_test, feat_stats = setup_case()
        pred = fit_context(params, MODEL, x_train, y_train, feat_stats, y_train.mean(), y_train.std())
        probs = bin_distributions(pred, x_test)
        assert probs.shape == (x_test.shape[0], MODEL.k_bins)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)


class TestPredictAllTasks:
    def _multi(self, seed=0, n=40, d=4, m=10, t=3):
        rng = np.random.default_rng(seed)
        x_train = rng.normal(size=(n, d))
        y_train = rng.normal(size=(n, t)) * [3.0, 5.0, 1.0] + [50.0, 100.0, 20.0]
        x_test = rng.normal(size=(m, d))
        feat_stats = FeatureStats(mean=x_train.mean(axis=0), std=x_train.std(axis=0))
        tstats = TargetStats(mean=y_train.mean(axis=0), std=y_train.std(axis=0))
        params = init_params(MODEL, seed)
        params["out.w"] = 0.05 * rng.normal(size=params["out.w"].shape)
        return params, x_train, y_train, x_test, feat_stats, tstats

    def test_output_shape(self):
        params, x_train, y_train, x_test, fs, ts = self._multi()
        out = predict_all_tasks(params, MODEL, x_train, y_train, x_test, fs, ts)
        assert out.shape == (10, 3)

    def test_columns_match_standalone(self):
        params, x_train, y_train, x_test, fs, ts = self._multi()
        out = predict_all_tasks(params, MODEL, x_train, y_train, x_test, fs, ts)
        for i in range(3):
            pred = fit_context(params, MODEL, x_train, y_train[:, i], fs, ts.mean[i], ts.std[i])
            np.testing.assert_array_equal(out[:, i], predict(pred, x_test))

    def test_per_task_bundle(self):
        params, x_train, y_train, x_test, fs, ts = self._multi()
        bundle = [params, params, params]
        out_list = predict_all_tasks(bundle, MODEL, x_train, y_train, x_test, fs, ts)
        out_single = predict_all_tasks(params, MODEL, x_train, y_train, x_test, fs, ts)
        np.testing.assert_array_equal(out_list, out_single)

    def test_wrong_bundle_size(self):
        params, x_train, y_train, x_test, fs, ts = self._multi()
        with pytest.raises(ValueError):
            predict_all_tasks([params, params], MODEL, x_train, y_train, x_test, fs, ts)
