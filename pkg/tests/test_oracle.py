import numpy as np
import pytest

from msv import (
    Baseline,
    ConstantClassifier,
    InputTensor,
    OracleLimit,
    OracleLimitError,
    OverlapEvidenceClassifier,
    PatchEvidenceClassifier,
    SinglePixelClassifier,
    enumerate_minimal_sufficient,
    verify_greedy_against_oracle,
)
from msv.fixtures import flat_patch_instance, single_pixel_instance


def views_as_sets(views):
    return {v.as_set() for v in views}


class TestEnumeration:
    def test_single_pixel_only_that_site(self):
        x, clf = single_pixel_instance(site=0, n=4)
        found = enumerate_minimal_sufficient(clf, x, Baseline.black())
        assert views_as_sets(found) == {frozenset({0})}

    def test_two_patches_exactly(self):
        data = np.full(6, 0.2)
        data[[0, 1, 3, 4]] = 1.0
        x = InputTensor(data)
        clf = PatchEvidenceClassifier([(0, 1), (3, 4)])
        found = enumerate_minimal_sufficient(clf, x, Baseline.black())
        assert views_as_sets(found) == {frozenset({0, 1}), frozenset({3, 4})}

    def test_constant_classifier_has_no_minimal_view(self):
        # With a constant classifier even the empty mask keeps the class, so
        # the single-element-removal condition never holds for any view.
        x = InputTensor(np.full(4, 0.5))
        found = enumerate_minimal_sufficient(ConstantClassifier(0), x, Baseline.black())
        assert found == []

    def test_refuses_large_n(self):
        x = InputTensor(np.zeros(20))
        with pytest.raises(OracleLimitError):
            enumerate_minimal_sufficient(
                SinglePixelClassifier(site=0), x, Baseline.black(), OracleLimit(max_n=16)
            )

    def test_no_view_is_strict_subset_of_another(self):
        rng = np.random.default_rng(2)
        for trial in range(8):
            d = int(rng.integers(1, 4))
            x, clf, _ = flat_patch_instance(seed=trial, n_patches=d, n=10)
            found = enumerate_minimal_sufficient(clf, x, Baseline.black())
            sets = [v.as_set() for v in found]
            for a in sets:
                for b in sets:
                    assert not (a < b)


class TestGreedyVersusOracle:
    def test_patch_counts_match_design(self):
        for d in (1, 2, 3):
            x, clf, _ = flat_patch_instance(seed=20 + d, n_patches=d, n=12)
            verdict, result = verify_greedy_against_oracle(clf, x, Baseline.black())
            assert verdict.passed
            assert result.n_views == d
            assert len(verdict.oracle_views) == d

    def test_overlapping_evidence_single_view(self):
        data = np.full(6, 0.2)
        data[[0, 1, 2]] = 1.0
        x = InputTensor(data)
        clf = OverlapEvidenceClassifier([(0, 1), (1, 2)])
        verdict, result = verify_greedy_against_oracle(clf, x, Baseline.black())
        assert verdict.passed
        assert result.n_views == 1
        assert views_as_sets(verdict.oracle_views) == {frozenset({0, 1}), frozenset({1, 2})}

    def test_n_equals_one(self):
        x = InputTensor(np.array([1.0]))
        verdict, result = verify_greedy_against_oracle(
            SinglePixelClassifier(site=0), x, Baseline.black()
        )
        assert verdict.passed
        assert result.msv_set.views[0].indices == (0,)

        degenerate_verdict, degenerate_result = verify_greedy_against_oracle(
            ConstantClassifier(0), x, Baseline.black()
        )
        assert degenerate_result.degenerate
        assert degenerate_verdict.degenerate
        assert not degenerate_verdict.passed

    def test_fuzz_every_greedy_view_is_exactly_minimal(self):
        rng = np.random.default_rng(7)
        for trial in range(12):
            d = int(rng.integers(1, 5))
            x, clf, _ = flat_patch_instance(
                seed=int(rng.integers(0, 2**31)), n_patches=d, n=12
            )
            verdict, result = verify_greedy_against_oracle(
                clf, x, Baseline.black(), seed=trial
            )
            assert verdict.passed, (trial, d)
            assert result.n_views == d
