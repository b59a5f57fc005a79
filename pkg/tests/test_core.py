import numpy as np
import pytest

from msv import (
    Baseline,
    ConstantClassifier,
    InputTensor,
    MsvSet,
    ParameterError,
    Prediction,
    ShapeMismatchError,
    SinglePixelClassifier,
    SiteIndexError,
    View,
    is_sufficient,
    mask_input,
)


class TestInputTensor:
    def test_flat_and_image_site_counts(self):
        assert InputTensor(np.zeros(5)).n_sites == 5
        assert InputTensor(np.zeros((3, 4, 2))).n_sites == 12

    def test_rejects_bad_shapes_and_values(self):
        with pytest.raises(ParameterError):
            InputTensor(np.zeros((2, 2)))
        with pytest.raises(ParameterError):
            InputTensor(np.array([]))
        with pytest.raises(ParameterError):
            InputTensor(np.array([1.0, np.nan]))

    def test_data_is_read_only(self, flat4):
        with pytest.raises(ValueError):
            flat4.data[0] = 9.0

    def test_site_values_mean_channels(self):
        x = InputTensor(np.array([[[0.0, 1.0]]]))
        assert x.site_values()[0] == pytest.approx(0.5)


class TestView:
    def test_sorted_and_deduplicated(self):
        assert View.of([3, 1, 2]).indices == (1, 2, 3)
        with pytest.raises(ParameterError):
            View.of([1, 1])
        with pytest.raises(ParameterError):
            View.of([])
        with pytest.raises(SiteIndexError):
            View.of([-1])

    def test_mask_round_trip(self):
        view = View.of([0, 2, 5])
        mask = view.to_mask(6)
        assert View.from_mask(mask) == view


class TestBaseline:
    def test_white_black(self, image_8x8):
        assert np.all(Baseline.white().materialize(image_8x8) == 1.0)
        assert np.all(Baseline.black().materialize(image_8x8) == 0.0)

    def test_dataset_mean_with_stats(self, image_8x8):
        b = Baseline.dataset_mean([0.2, 0.4, 0.6]).materialize(image_8x8)
        assert np.all(b[..., 0] == 0.2) and np.all(b[..., 2] == 0.6)

    def test_dataset_mean_without_stats_warns_mid_gray(self, image_8x8):
        with pytest.warns(UserWarning):
            b = Baseline.dataset_mean().materialize(image_8x8)
        assert np.all(b == 0.5)

    def test_random_normal_reproducible_and_clamped(self, image_8x8):
        base = Baseline.random_normal(seed=7)
        a = base.materialize(image_8x8)
        b = base.materialize(image_8x8)
        assert np.array_equal(a, b)
        assert a.min() >= 0.0 and a.max() <= 1.0
        c = Baseline.random_normal(seed=8).materialize(image_8x8)
        assert not np.array_equal(a, c)

    def test_constant_shape_checked(self, flat4):
        assert np.array_equal(
            Baseline.constant([9, 8, 7, 6]).materialize(flat4), [9, 8, 7, 6]
        )
        with pytest.raises(ShapeMismatchError):
            Baseline.constant([1, 2]).materialize(flat4)


class TestPrediction:
    def test_validation(self):
        with pytest.raises(ParameterError):
            Prediction(np.array([1.0]))
        with pytest.raises(ParameterError):
            Prediction(np.array([0.7, 0.7]))
        with pytest.raises(ParameterError):
            Prediction(np.array([-0.2, 1.2]))

    def test_top_class_tie_breaks_low(self):
        assert Prediction(np.array([0.4, 0.4, 0.2])).top_class == 0

    def test_sum_tolerance(self):
        Prediction(np.array([0.5, 0.5 + 5e-7]))


class TestMaskInput:
    def test_full_view_is_identity(self, flat4, black):
        out = mask_input(flat4, View.full(4), black)
        assert np.array_equal(out.data, flat4.data)

    def test_empty_view_is_baseline(self, flat4, black):
        out = mask_input(flat4, None, black)
        assert np.all(out.data == 0.0)
        out2 = mask_input(flat4, [], black)
        assert np.all(out2.data == 0.0)

    def test_direct_substitution(self):
        x = InputTensor(np.array([1.0, 2.0, 3.0, 4.0]))
        out = mask_input(x, View.of([1, 3]), Baseline.black())
        assert np.array_equal(out.data, [0.0, 2.0, 0.0, 4.0])

    def test_image_masks_whole_site(self, black):
        x = InputTensor(np.ones((2, 2, 3)))
        out = mask_input(x, View.of([1]), black)
        assert np.all(out.data[0, 1, :] == 1.0)
        assert np.all(out.data[0, 0, :] == 0.0)

    def test_idempotent(self, image_8x8):
        b = Baseline.random_normal(seed=1)
        view = View.of([0, 5, 17, 63])
        once = mask_input(image_8x8, view, b)
        twice = mask_input(once, view, b)
        assert np.array_equal(once.data, twice.data)

    def test_differs_from_baseline_only_on_view(self, image_8x8, black):
        view = View.of([3, 9, 20])
        out = mask_input(image_8x8, view, black)
        b = black.materialize(image_8x8)
        diff_sites = np.flatnonzero(
            (out.data != b).any(axis=2).reshape(-1)
        )
        assert set(diff_sites) <= set(view.indices)

    def test_shape_mismatch_is_configuration_error(self, flat4):
        with pytest.raises(ShapeMismatchError):
            mask_input(flat4, View.of([0]), np.zeros(5))

    def test_out_of_range_site_is_domain_error(self, flat4, black):
        with pytest.raises(SiteIndexError):
            mask_input(flat4, View.of([4]), black)


class TestIsSufficient:
    def test_full_view_always_sufficient(self, flat4, black):
        clf = SinglePixelClassifier(site=0)
        k = clf.classify_batch([flat4])[0].top_class
        assert is_sufficient(clf, flat4, View.full(4), black, k)

    def test_single_pixel_classifier_by_hand(self, black):
        x = InputTensor(np.array([1.0, 0.9, 0.9, 0.9]))
        clf = SinglePixelClassifier(site=0, threshold=0.5)
        k = clf.classify_batch([x])[0].top_class
        assert k == 1
        assert is_sufficient(clf, x, View.of([0]), black, k)
        assert not is_sufficient(clf, x, View.of([1]), black, k)

    def test_constant_classifier_any_view(self, flat4, black):
        clf = ConstantClassifier(0)
        assert is_sufficient(clf, flat4, View.of([2]), black, 0)


class TestMsvSet:
    def test_rejects_overlapping_views(self):
        with pytest.raises(ParameterError):
            MsvSet(views=(View.of([0, 1]), View.of([1, 2])), predicted_class=0, remainder_class=1)

    def test_remainder_mask(self):
        m = MsvSet(views=(View.of([0]), View.of([2])), predicted_class=0, remainder_class=1)
        assert np.array_equal(m.remainder_mask(4), [False, True, False, True])
