import numpy as np

from msv import (
    ConstantClassifier,
    GreedyConfig,
    InputTensor,
    MsvSet,
    SplitStrategy,
    View,
    greedy_msvs,
    is_beta_split_minimal,
    is_valid_msv_set,
)
from msv.fixtures import patch_instance
from msv.validity import validate_greedy_result


def test_single_site_view_minimal_iff_baseline_breaks(black):
    x = InputTensor(np.array([1.0, 0.3, 0.3, 0.3]))
    from msv import SinglePixelClassifier

    clf = SinglePixelClassifier(site=0)
    assert is_beta_split_minimal(clf, x, View.of([0]), black, 1, SplitStrategy.grid(), 4)
    # constant classifier: removing the only group keeps the class
    const = ConstantClassifier(0)
    assert not is_beta_split_minimal(const, x, View.of([0]), black, 0, SplitStrategy.grid(), 4)


def test_full_view_not_minimal_on_patch_instance(black):
    inst = patch_instance(seed=1, n_patches=3)
    full = View.full(inst.x.n_sites)
    assert not is_beta_split_minimal(
        inst.classifier, inst.x, full, black, 1, SplitStrategy.grid(), 16
    )


def test_exact_patch_view_is_minimal(black):
    inst = patch_instance(seed=1, n_patches=3)
    patch = View.of(inst.patches[0])
    assert is_beta_split_minimal(
        inst.classifier, inst.x, patch, black, 1, SplitStrategy.grid(), 16
    )


def test_greedy_output_passes_all_flags(black):
    inst = patch_instance(seed=2, n_patches=3)
    cfg = GreedyConfig(beta=16, strategy=SplitStrategy.grid(seed=0), baseline=black)
    result = greedy_msvs(inst.classifier, inst.x, cfg)
    report = validate_greedy_result(inst.classifier, inst.x, result, cfg)
    assert report.valid
    assert all(report.sufficiency) and all(report.minimality)
    assert report.disjoint and report.remainder_insufficient


def test_hand_built_overlap_fails_disjointness(black):
    # MsvSet itself rejects overlaps, so feed overlapping views directly.
    inst = patch_instance(seed=2, n_patches=2)
    msv_set = MsvSet.__new__(MsvSet)
    object.__setattr__(msv_set, "views", (View.of(inst.patches[0]), View.of(inst.patches[0])))
    object.__setattr__(msv_set, "predicted_class", 1)
    object.__setattr__(msv_set, "remainder_class", 0)
    report = is_valid_msv_set(
        inst.classifier, inst.x, msv_set, black, SplitStrategy.grid(), 16
    )
    assert not report.disjoint
    assert not report.valid
    assert "views overlap" in report.failures()


def test_remainder_still_sufficient_flagged(black):
    inst = patch_instance(seed=4, n_patches=2)
    # Only one of two patches claimed: the remainder still holds the other.
    msv_set = MsvSet(
        views=(View.of(inst.patches[0]),), predicted_class=1, remainder_class=1
    )
    report = is_valid_msv_set(
        inst.classifier, inst.x, msv_set, black, SplitStrategy.grid(), 16
    )
    assert not report.remainder_insufficient
    assert not report.valid


def test_insufficient_view_flagged(black):
    inst = patch_instance(seed=5, n_patches=2)
    background = [s for s in range(inst.x.n_sites) if all(s not in p for p in inst.patches)]
    msv_set = MsvSet(
        views=(View.of(background[:4]),), predicted_class=1, remainder_class=1
    )
    report = is_valid_msv_set(
        inst.classifier, inst.x, msv_set, black, SplitStrategy.grid(), 16
    )
    assert not report.sufficiency[0]
    assert not report.valid
