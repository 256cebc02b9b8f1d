import numpy as np
import pytest

from minipfn.errors import AllValuesEqualError, NonFiniteTargetError, ZeroProbabilityError
from minipfn.support import (
    SupportSpec,
    build_support,
    decode_expectation,
    decode_expectations,
    encode_target,
    encode_targets,
    reg_loss,
    reg_loss_grad,
    softmax_probs,
)


def make_spec(centers):
    centers = np.asarray(centers, dtype=float)
    mid = 0.5 * (centers[:-1] + centers[1:])
    borders = np.concatenate(([centers[0] - 1.0], mid, [centers[-1] + 1.0]))
    return SupportSpec(centers=centers, borders=borders)


class TestBuildSupport:
    def test_quantile_borders_with_extension(self):
        # recomputed by hand: quantiles of [0,1,2,3] at (0,.5,1) are (0,1.5,3),
        # outer borders pushed out by 1% of the range 3
        spec = build_support([0, 1, 2, 3], k=2)
        np.testing.assert_allclose(spec.borders, [-0.03, 1.5, 3.03], atol=1e-12)
        np.testing.assert_allclose(spec.centers, [0.735, 2.265], atol=1e-12)

    def test_all_values_equal_raises(self):
        with pytest.raises(AllValuesEqualError):
            build_support([5, 5, 5], k=2)

    def test_symmetric_values_give_symmetric_centers(self):
        spec = build_support([-1, 1], k=2)
        np.testing.assert_allclose(spec.centers, -spec.centers[::-1], atol=1e-12)

    def test_equal_mass_property(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=1000)
        spec = build_support(values, k=8)
        counts = np.histogram(values, bins=spec.borders)[0]
        assert counts.sum() == 1000
        assert counts.min() >= 100  # equal-mass within quantile granularity

    def test_k_too_large_degrades_with_warning(self):
        with pytest.warns(UserWarning, match="effective k"):
            spec = build_support([0.0, 0.0, 0.0, 1.0], k=8)
        assert 2 <= spec.k < 8

    def test_borders_cover_data(self):
        rng = np.random.default_rng(1)
        values = rng.normal(size=50)
        spec = build_support(values, k=5)
        assert spec.borders[0] <= values.min()
        assert spec.borders[-1] >= values.max()

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            build_support([], k=2)
        with pytest.raises(ValueError):
            build_support([0, 1], k=1)
        with pytest.raises(NonFiniteTargetError):
            build_support([0.0, np.nan], k=2)


class TestEncodeTarget:
    def test_exact_center_is_one_hot(self):
        spec = make_spec([0, 1, 2])
        np.testing.assert_array_equal(encode_target(1.0, spec), [0, 1, 0])

    def test_linear_interpolation(self):
        spec = make_spec([0, 1, 2])
        np.testing.assert_allclose(encode_target(0.25, spec), [0.75, 0.25, 0], atol=1e-15)

    def test_clamp_above_support(self):
        spec = make_spec([0, 1, 2])
        np.testing.assert_array_equal(encode_target(5.0, spec), [0, 0, 1])

    def test_clamp_below_support(self):
        spec = make_spec([0, 1, 2])
        np.testing.assert_array_equal(encode_target(-3.0, spec), [1, 0, 0])

    def test_non_finite_rejected(self):
        spec = make_spec([0, 1, 2])
        with pytest.raises(NonFiniteTargetError):
            encode_target(float("nan"), spec)

    def test_sums_to_one_with_at_most_two_nonzero(self):
        rng = np.random.default_rng(2)
        spec = build_support(rng.normal(size=200), k=16)
        for y in rng.uniform(-4, 4, size=200):
            p = encode_target(y, spec)
            assert abs(p.sum() - 1.0) < 1e-12
            assert np.count_nonzero(p) <= 2

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        spec = build_support(rng.normal(size=100), k=8)
        ys = rng.uniform(-3, 3, size=50)
        batch = encode_targets(ys, spec)
        for i, y in enumerate(ys):
            np.testing.assert_array_equal(batch[i], encode_target(y, spec))


class TestSoftmax:
    def test_symmetry(self):
        np.testing.assert_allclose(softmax_probs([0.0, 0.0]), [0.5, 0.5], atol=1e-15)

    def test_shift_invariance(self):
        for c in (-100.0, 0.0, 17.5):
            np.testing.assert_allclose(softmax_probs([c, c, c]), [1 / 3] * 3, atol=1e-15)

    def test_saturation_no_overflow(self):
        np.testing.assert_allclose(softmax_probs([1000.0, 0.0]), [1.0, 0.0], atol=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(NonFiniteTargetError):
            softmax_probs([np.inf, 0.0])


class TestRegLoss:
    def test_one_hot_uniform_logits(self):
        assert reg_loss([1, 0], softmax_probs([0.0, 0.0])) == pytest.approx(np.log(2), abs=1e-12)

    def test_loss_equals_entropy_at_optimum(self):
        assert reg_loss([0.5, 0.5], [0.5, 0.5]) == pytest.approx(np.log(2), abs=1e-12)

    def test_soft_label_against_uniform(self):
        # direct evaluation: -sum p_k log(1/3) = log 3
        q = softmax_probs([0.0, 0.0, 0.0])
        assert reg_loss([0.75, 0.25, 0.0], q) == pytest.approx(np.log(3), abs=1e-12)

    def test_zero_probability_under_support(self):
        with pytest.raises(ZeroProbabilityError):
            reg_loss([0.5, 0.5], [1.0, 0.0])

    def test_loss_at_least_entropy(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            k = int(rng.integers(2, 8))
            p = rng.dirichlet(np.ones(k))
            z = rng.normal(size=k) * 3
            q = softmax_probs(z)
            entropy = -np.sum(p[p > 0] * np.log(p[p > 0]))
            assert reg_loss(p, q) >= entropy - 1e-10


class TestRegLossGrad:
    def test_one_hot_case(self):
        np.testing.assert_allclose(reg_loss_grad([1, 0], [0.0, 0.0]), [-0.5, 0.5], atol=1e-15)

    def test_stationary_at_match(self):
        z = np.array([0.3, -1.2, 0.7])
        p = softmax_probs(z)
        np.testing.assert_allclose(reg_loss_grad(p, z), 0.0, atol=1e-15)

    def test_matches_finite_differences(self):
        # independent oracle: central differences of reg_loss at step 1e-5
        rng = np.random.default_rng(5)
        h = 1e-5
        for _ in range(100):
            k = int(rng.integers(2, 10))
            p = rng.dirichlet(np.ones(k))
            z = rng.normal(size=k) * 2
            grad = reg_loss_grad(p, z)
            for j in range(k):
                zp, zm = z.copy(), z.copy()
                zp[j] += h
                zm[j] -= h
                fd = (reg_loss(p, softmax_probs(zp)) - reg_loss(p, softmax_probs(zm))) / (2 * h)
                denom = max(abs(fd), abs(grad[j]), 1e-8)
                assert abs(fd - grad[j]) / denom < 1e-6


class TestDecode:
    def test_symmetric_distribution(self):
        spec = make_spec([0, 1, 2])
        assert decode_expectation([0.25, 0.5, 0.25], spec) == pytest.approx(1.0, abs=1e-15)

    def test_one_hot_returns_center(self):
        spec = make_spec([0.5, 1.5, 4.0])
        for k in range(3):
            q = np.zeros(3)
            q[k] = 1.0
            assert decode_expectation(q, spec) == spec.centers[k]

    def test_round_trip_within_support(self):
        rng = np.random.default_rng(6)
        spec = build_support(rng.normal(size=500), k=32)
        c1, ck = spec.centers[0], spec.centers[-1]
        ys = rng.uniform(c1, ck, size=1000)
        for y in ys:
            assert abs(decode_expectation(encode_target(y, spec), spec) - y) <= 1e-12

    def test_decode_always_inside_support(self):
        rng = np.random.default_rng(7)
        spec = build_support(rng.normal(size=100), k=8)
        for _ in range(200):
            q = rng.dirichlet(np.ones(8))
            v = decode_expectation(q, spec)
            assert spec.centers[0] - 1e-12 <= v <= spec.centers[-1] + 1e-12

    def test_vectorized_decode(self):
        rng = np.random.default_rng(8)
        spec = build_support(rng.normal(size=100), k=8)
        qs = rng.dirichlet(np.ones(8), size=20)
        np.testing.assert_allclose(
            decode_expectations(qs, spec), [decode_expectation(q, spec) for q in qs], atol=1e-15
        )


class TestSupportSpecInvariants:
    def test_rejects_k_below_two(self):
        with pytest.raises(ValueError):
            SupportSpec(centers=np.array([1.0]), borders=np.array([0.0, 2.0]))

    def test_rejects_nonmonotonic_centers(self):
        with pytest.raises(ValueError):
            SupportSpec(centers=np.array([1.0, 1.0]), borders=np.array([0.0, 1.0, 2.0]))

    def test_rejects_centers_outside_borders(self):
        with pytest.raises(ValueError):
            SupportSpec(centers=np.array([0.5, 5.0]), borders=np.array([0.0, 1.0, 2.0]))

    def test_dict_round_trip(self):
        spec = build_support([0, 1, 2, 3, 4], k=3)
        back = SupportSpec.from_dict(spec.to_dict())
        np.testing.assert_array_equal(back.centers, spec.centers)
        np.testing.assert_array_equal(back.borders, spec.borders)
