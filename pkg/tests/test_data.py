import numpy as np
import pytest

from minipfn.data import (
    SplitSpec,
    SynthConfig,
    TabularDataset,
    gen_synthetic_steel,
    impute_and_stats,
    load_csv,
    split,
    standardize_features,
)
from minipfn.errors import (
    DataError,
    MalformedRowError,
    NonNumericCellError,
    TooFewColumnsError,
    ZeroVarianceTaskError,
)
from minipfn.metrics import spearman_matrix


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_basic(self, tmp_path):
        path = write(tmp_path, "a,b,t\n1,2,3\n4,5,6\n7,8,9\n")
        ds = load_csv(path, n_targets=1)
        assert (ds.n_rows, ds.n_features, ds.n_targets) == (3, 2, 1)
        assert ds.feature_names == ["a", "b"] and ds.target_names == ["t"]
        np.testing.assert_array_equal(ds.y[:, 0], [3, 6, 9])

    def test_header_only_is_error(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(write(tmp_path, "a,b,t\n"), n_targets=1)

    def test_non_numeric_cell_reports_location(self, tmp_path):
        path = write(tmp_path, "a,b,t\n1,abc,3\n")
        with pytest.raises(NonNumericCellError) as exc:
            load_csv(path, n_targets=1)
        assert exc.value.line == 2 and exc.value.column == "b"

    def test_ragged_row(self, tmp_path):
        with pytest.raises(MalformedRowError):
            load_csv(write(tmp_path, "a,b,t\n1,2\n"), n_targets=1)

    def test_too_few_columns(self, tmp_path):
        with pytest.raises(TooFewColumnsError):
            load_csv(write(tmp_path, "a,t\n1,2\n"), n_targets=2)

    def test_empty_feature_cell_is_missing(self, tmp_path):
        ds = load_csv(write(tmp_path, "a,b,t\n1,,3\n4,5,6\n"), n_targets=1)
        assert np.isnan(ds.x[0, 1])
        assert ds.x[1, 1] == 5.0

    def test_missing_target_is_error(self, tmp_path):
        with pytest.raises(MalformedRowError):
            load_csv(write(tmp_path, "a,b,t\n1,2,\n"), n_targets=1)

    def test_duplicate_names_rejected(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(write(tmp_path, "a,a,t\n1,2,3\n"), n_targets=1)


class TestSplit:
    def _ds(self, n):
        return TabularDataset(["f"], ["t"], np.arange(n, dtype=float)[:, None], np.ones((n, 1)) + np.arange(n)[:, None])

    def test_sizes_70_30(self):
        train, test = split(self._ds(10), SplitSpec(0.7, seed=0))
        assert len(train) == 7 and len(test) == 3

    def test_deterministic(self):
        a = split(self._ds(50), SplitSpec(0.7, seed=3))
        b = split(self._ds(50), SplitSpec(0.7, seed=3))
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_different_seeds_differ(self):
        a = split(self._ds(50), SplitSpec(0.7, seed=1))
        b = split(self._ds(50), SplitSpec(0.7, seed=2))
        assert not np.array_equal(a[0], b[0])

    def test_partition(self):
        train, test = split(self._ds(23), SplitSpec(0.7, seed=5))
        union = np.sort(np.concatenate([train, test]))
        np.testing.assert_array_equal(union, np.arange(23))
        assert len(np.intersect1d(train, test)) == 0

    def test_extreme_fraction_clamped(self):
        train, test = split(self._ds(3), SplitSpec(0.01, seed=0))
        assert len(train) >= 1 and len(test) >= 1

    def test_needs_two_rows(self):
        with pytest.raises(DataError):
            split(self._ds(1), SplitSpec(0.7, seed=0))


class TestImputeAndStats:
    def _ds(self):
        x = np.array([[1.0, np.nan], [3.0, 4.0], [5.0, 8.0], [np.nan, 2.0]])
        y = np.array([[10.0], [20.0], [30.0], [40.0]])
        return TabularDataset(["a", "b"], ["t"], x, y)

    def test_no_missing_unchanged(self):
        ds = TabularDataset(["a"], ["t"], np.array([[1.0], [2.0]]), np.array([[1.0], [3.0]]))
        imputed, _, _ = impute_and_stats(ds, [0, 1])
        np.testing.assert_array_equal(imputed.x, ds.x)

    def test_imputes_with_train_mean(self):
        imputed, _, _ = impute_and_stats(self._ds(), [0, 1, 2])
        assert imputed.x[0, 1] == pytest.approx(6.0)  # mean of train column b = (4+8)/2
        assert imputed.x[3, 0] == pytest.approx(3.0)  # test row imputed from train mean

    def test_all_missing_train_column_is_error(self):
        x = np.array([[np.nan, 1.0], [np.nan, 2.0], [7.0, 3.0]])
        ds = TabularDataset(["a", "b"], ["t"], x, np.array([[1.0], [2.0], [3.0]]))
        with pytest.raises(DataError):
            impute_and_stats(ds, [0, 1])

    def test_stats_ignore_test_rows(self):
        ds = self._ds()
        _, feat1, tgt1 = impute_and_stats(ds, [0, 1, 2])
        ds.x[3, 0] = 1e9  # mutate a test row
        ds.y[3, 0] = -1e9
        _, feat2, tgt2 = impute_and_stats(ds, [0, 1, 2])
        np.testing.assert_array_equal(feat1.mean, feat2.mean)
        np.testing.assert_array_equal(feat1.std, feat2.std)
        np.testing.assert_array_equal(tgt1.mean, tgt2.mean)
        np.testing.assert_array_equal(tgt1.std, tgt2.std)

    def test_zero_variance_target(self):
        ds = TabularDataset(["a"], ["t"], np.array([[1.0], [2.0]]), np.array([[5.0], [5.0]]))
        with pytest.raises(ZeroVarianceTaskError):
            impute_and_stats(ds, [0, 1])

    def test_standardize_features_round_numbers(self):
        ds = self._ds()
        imputed, feat, _ = impute_and_stats(ds, [0, 1, 2])
        z = standardize_features(imputed.x[[0, 1, 2]], feat)
        np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(z.std(axis=0), 1.0, atol=1e-12)


class TestSynthetic:
    def test_shapes_and_names(self):
        ds = gen_synthetic_steel(SynthConfig(n=100, d=7, strength_tasks=3, elongation_tasks=2, seed=0))
        assert ds.x.shape == (100, 7)
        assert ds.y.shape == (100, 5)
        assert ds.target_names == ["strength_1", "strength_2", "strength_3", "elongation_1", "elongation_2"]

    def test_deterministic(self):
        a = gen_synthetic_steel(SynthConfig(n=50, d=4, seed=9))
        b = gen_synthetic_steel(SynthConfig(n=50, d=4, seed=9))
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.y, b.y)

    def test_correlation_structure_at_default_noise(self):
        ds = gen_synthetic_steel(SynthConfig(n=2000, d=20, seed=0))
        rho = spearman_matrix(ds.y)
        s = ds.y.shape[1] - 1
        for i in range(s):
            for j in range(i + 1, s):
                assert rho[i, j] > 0.9
        for i in range(s):
            assert rho[i, s] < -0.7

    def test_targets_positive(self):
        # metric suite needs nonzero targets and predictions
        ds = gen_synthetic_steel(SynthConfig(n=5000, d=10, seed=3))
        assert np.all(ds.y > 0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SynthConfig(strength_tasks=1, elongation_tasks=0)
        with pytest.raises(ValueError):
            SynthConfig(noise_std=-0.5)
