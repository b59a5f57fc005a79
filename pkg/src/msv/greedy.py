"""Greedy extraction of minimal sufficient views.

The outer loop repeatedly carves one view out of the not-yet-used sites
while the remainder still carries the original prediction. The inner
shrink re-partitions the current view at every level, drops the group
whose removal changes the predicted-class score the least, and stops as
soon as the drop would change the class itself (or empty the view).

Candidate evaluations of one level are scored by the absolute change of
the predicted class's post-softmax probability and are issued to the
classifier as a single batch; the chosen candidate's prediction is reused
as the sufficiency judgment, so one level costs at most ``beta' + 1``
classifier queries.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import Baseline, InputTensor, MsvSet, Prediction, View, mask_sites
from .errors import GreedyRunError, ParameterError
from .split import SplitStrategy, derive_seed, split

BETA_STUDIED_RANGE = (4, 64)


@dataclass(frozen=True)
class GreedyConfig:
    """Search knobs for one run.

    ``max_views`` and ``max_depth`` default to the site count, which never
    binds for a terminating classifier. ``tie_break`` exists as a negative
    control for determinism checks and must stay "low" in normal use.
    """

    beta: int = 16
    strategy: SplitStrategy = field(default_factory=SplitStrategy.slic)
    baseline: Baseline = field(default_factory=Baseline.black)
    max_views: int | None = None
    max_depth: int | None = None
    tie_break: str = "low"

    def __post_init__(self):
        if self.beta < 2:
            raise ParameterError(f"beta must be at least 2, got {self.beta}")
        if self.tie_break not in ("low", "high"):
            raise ParameterError("tie_break must be 'low' or 'high'")
        if not BETA_STUDIED_RANGE[0] <= self.beta <= BETA_STUDIED_RANGE[1]:
            warnings.warn(
                f"beta={self.beta} is outside the studied range "
                f"{BETA_STUDIED_RANGE[0]}..{BETA_STUDIED_RANGE[1]}",
                stacklevel=2,
            )
        if self.max_views is not None and self.max_views < 1:
            raise ParameterError("max_views must be at least 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ParameterError("max_depth must be nonnegative")


@dataclass(frozen=True)
class LevelRecord:
    """One shrink level: what was split, what was removed, what it cost."""

    depth: int
    view_size: int
    n_groups: int
    max_group_size: int
    queries: int
    chosen_group: tuple[int, ...]
    score_gap: float


@dataclass
class MsvRunTrace:
    """Instrumentation for one run; query counts are exact."""

    levels: list[LevelRecord] = field(default_factory=list)
    outer_queries: int = 0
    wall_time: float = 0.0

    @property
    def total_queries(self) -> int:
        return self.outer_queries + sum(rec.queries for rec in self.levels)


def query_count(trace: MsvRunTrace) -> int:
    """Exact number of classifier evaluations issued during the run."""
    return trace.total_queries


@dataclass(frozen=True)
class GreedyResult:
    """A completed run: the view set plus everything needed to replay it."""

    msv_set: MsvSet
    prediction: Prediction
    view_seeds: tuple[int, ...]
    view_depths: tuple[int, ...]
    trace: MsvRunTrace
    degenerate: bool

    @property
    def n_views(self) -> int:
        return self.msv_set.n_views


def _pick(gaps: np.ndarray, tie_break: str) -> int:
    if tie_break == "low":
        return int(np.argmin(gaps))
    reversed_pick = int(np.argmin(gaps[::-1]))
    return gaps.size - 1 - reversed_pick


def _shrink(
    classifier,
    x: InputTensor,
    baseline_data: np.ndarray,
    view_mask: np.ndarray,
    predicted_class: int,
    top_score: float,
    cfg: GreedyConfig,
    trace: MsvRunTrace,
    depth: int,
) -> tuple[np.ndarray, int, int]:
    """Shrink ``view_mask`` until group-level minimality holds.

    Returns the final mask, the depth of the final level, and the split
    seed that was used there.
    """
    view_mask = view_mask.copy()
    max_depth = cfg.max_depth if cfg.max_depth is not None else x.n_sites
    while True:
        if depth > max_depth:
            raise GreedyRunError(
                f"shrink exceeded max_depth={max_depth}; classifier may be degenerate",
                trace=trace,
            )
        level_seed = derive_seed(cfg.strategy.seed, depth)
        strategy = cfg.strategy.with_seed(level_seed)
        groups = split(strategy, View.from_mask(view_mask), x, cfg.beta)

        candidates = []
        candidate_masks = []
        for group in groups:
            masked_view = view_mask.copy()
            masked_view[list(group)] = False
            candidate_masks.append(masked_view)
            candidates.append(
                InputTensor._from_trusted(
                    mask_sites(x.data, baseline_data, np.flatnonzero(masked_view))
                )
            )
        preds = classifier.classify_batch(candidates)
        gaps = np.abs(top_score - np.array([p.scores[predicted_class] for p in preds]))
        pick = _pick(gaps, cfg.tie_break)
        trace.levels.append(
            LevelRecord(
                depth=depth,
                view_size=int(view_mask.sum()),
                n_groups=len(groups),
                max_group_size=max(len(g) for g in groups),
                queries=len(groups),
                chosen_group=groups[pick],
                score_gap=float(gaps[pick]),
            )
        )
        shrunk = candidate_masks[pick]
        if preds[pick].top_class == predicted_class and shrunk.any():
            view_mask = shrunk
            depth += 1
            continue
        return view_mask, depth, level_seed


def estimate_msv(
    classifier,
    x: InputTensor,
    view: View,
    predicted_class: int,
    cfg: GreedyConfig,
    depth: int = 0,
) -> View:
    """Shrink a sufficient view to one that is sufficient and group-minimal.

    The caller guarantees the starting view is sufficient for
    ``predicted_class``. One extra query fetches the unmasked top score the
    gap comparisons are anchored to.
    """
    pred = classifier.classify_batch([x])[0]
    trace = MsvRunTrace(outer_queries=1)
    baseline_data = cfg.baseline.materialize(x)
    mask, _, _ = _shrink(
        classifier,
        x,
        baseline_data,
        view.to_mask(x.n_sites),
        int(predicted_class),
        float(pred.scores[int(predicted_class)]),
        cfg,
        trace,
        depth,
    )
    return View.from_mask(mask)


def greedy_msvs(classifier, x: InputTensor, cfg: GreedyConfig | None = None) -> GreedyResult:
    """Extract disjoint minimal sufficient views until the remainder flips.

    The returned result is degenerate when the loop stopped with the
    remainder still predicting the original class (baseline predicts the
    class, or the view cap was hit); such runs cannot satisfy the
    remainder condition and are flagged rather than failed.
    """
    cfg = cfg or GreedyConfig()
    started = time.perf_counter()
    trace = MsvRunTrace()
    baseline_data = cfg.baseline.materialize(x)

    initial = classifier.classify_batch([x])[0]
    trace.outer_queries += 1
    predicted_class = initial.top_class
    top_score = float(initial.scores[predicted_class])

    n = x.n_sites
    max_views = cfg.max_views if cfg.max_views is not None else n
    remaining = np.ones(n, dtype=bool)
    views: list[View] = []
    view_seeds: list[int] = []
    view_depths: list[int] = []

    while True:
        mask, final_depth, final_seed = _shrink(
            classifier, x, baseline_data, remaining, predicted_class, top_score, cfg, trace, 0
        )
        views.append(View.from_mask(mask))
        view_seeds.append(final_seed)
        view_depths.append(final_depth)
        remaining &= ~mask

        guard = classifier.classify_batch(
            [InputTensor._from_trusted(mask_sites(x.data, baseline_data, np.flatnonzero(remaining)))]
        )[0]
        trace.outer_queries += 1
        if guard.top_class != predicted_class or not remaining.any() or len(views) >= max_views:
            remainder_class = guard.top_class
            break

    trace.wall_time = time.perf_counter() - started
    msv_set = MsvSet(
        views=tuple(views),
        predicted_class=predicted_class,
        remainder_class=remainder_class,
    )
    return GreedyResult(
        msv_set=msv_set,
        prediction=initial,
        view_seeds=tuple(view_seeds),
        view_depths=tuple(view_depths),
        trace=trace,
        degenerate=remainder_class == predicted_class,
    )
