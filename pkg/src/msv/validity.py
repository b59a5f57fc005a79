"""Executable checks for sufficiency, group-level minimality, and view-set validity."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import InputTensor, MsvSet, View, is_sufficient, mask_input, mask_sites
from .split import SplitStrategy, split


def is_beta_split_minimal(
    classifier,
    x: InputTensor,
    view: View,
    baseline,
    predicted_class: int,
    strategy: SplitStrategy,
    beta: int,
) -> bool:
    """True iff removing any one split group from the view breaks sufficiency.

    Replayable: the strategy's stored seed selects the exact same partition
    the greedy search used at the view's final level, so pass a strategy
    carrying that recorded seed.
    """
    from .core import Baseline

    baseline_data = (
        baseline.materialize(x) if isinstance(baseline, Baseline) else np.asarray(baseline, float)
    )
    groups = split(strategy, view, x, beta)
    view_mask = view.to_mask(x.n_sites)
    batch = []
    for group in groups:
        shrunk = view_mask.copy()
        shrunk[list(group)] = False
        batch.append(
            InputTensor._from_trusted(mask_sites(x.data, baseline_data, np.flatnonzero(shrunk)))
        )
    preds = classifier.classify_batch(batch)
    return all(p.top_class != int(predicted_class) for p in preds)


@dataclass(frozen=True)
class ValidationReport:
    """Per-view and set-level flags for the three view-set conditions."""

    sufficiency: tuple[bool, ...]
    minimality: tuple[bool, ...]
    disjoint: bool
    remainder_insufficient: bool

    @property
    def valid(self) -> bool:
        return (
            all(self.sufficiency)
            and all(self.minimality)
            and self.disjoint
            and self.remainder_insufficient
        )

    def failures(self) -> list[str]:
        out = []
        for i, ok in enumerate(self.sufficiency):
            if not ok:
                out.append(f"view {i} not sufficient")
        for i, ok in enumerate(self.minimality):
            if not ok:
                out.append(f"view {i} not group-minimal")
        if not self.disjoint:
            out.append("views overlap")
        if not self.remainder_insufficient:
            out.append("remainder still sufficient")
        return out


def is_valid_msv_set(
    classifier,
    x: InputTensor,
    msv_set: MsvSet,
    baseline,
    strategy: SplitStrategy,
    beta: int,
    view_seeds: Sequence[int] | None = None,
) -> ValidationReport:
    """Check every view-set condition and report per-view flags.

    ``view_seeds`` replays each view's minimality check with the split seed
    recorded by the greedy run; without it the strategy is used as given.
    """
    k = msv_set.predicted_class
    sufficiency = tuple(
        is_sufficient(classifier, x, view, baseline, k) for view in msv_set.views
    )
    minimality = []
    for i, view in enumerate(msv_set.views):
        strat = strategy if view_seeds is None else strategy.with_seed(view_seeds[i])
        minimality.append(is_beta_split_minimal(classifier, x, view, baseline, k, strat, beta))

    covered: set[int] = set()
    disjoint = True
    for view in msv_set.views:
        if covered.intersection(view.indices):
            disjoint = False
            break
        covered.update(view.indices)

    remainder = msv_set.remainder_mask(x.n_sites)
    remainder_pred = classifier.classify_batch(
        [mask_input(x, np.flatnonzero(remainder), baseline)]
    )[0]
    return ValidationReport(
        sufficiency=sufficiency,
        minimality=tuple(minimality),
        disjoint=disjoint,
        remainder_insufficient=remainder_pred.top_class != k,
    )


def validate_greedy_result(classifier, x: InputTensor, result, cfg) -> ValidationReport:
    """Validate a greedy run with its own recorded per-view split seeds."""
    return is_valid_msv_set(
        classifier,
        x,
        result.msv_set,
        cfg.baseline,
        cfg.strategy,
        cfg.beta,
        view_seeds=result.view_seeds,
    )
