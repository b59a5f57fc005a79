"""Exhaustive brute-force reference for small inputs.

Enumerates every element-level minimal sufficient view by checking all
2^n - 1 non-empty index subsets, and cross-checks greedy output against
that list. Greedy runs compared here use grid splits with ``beta`` at
least the view size, where group-level minimality degenerates to
element-level minimality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Baseline, InputTensor, View, mask_sites
from .errors import OracleLimitError
from .greedy import GreedyConfig, GreedyResult, greedy_msvs
from .split import SplitStrategy

_BATCH = 2048


@dataclass(frozen=True)
class OracleLimit:
    """Enumeration refuses instances above these sizes."""

    max_n: int = 16
    max_groups: int = 20


def _sufficiency_table(classifier, x: InputTensor, baseline_data: np.ndarray) -> tuple[np.ndarray, int]:
    """Boolean table over all 2^n subsets: does the subset keep the class?"""
    n = x.n_sites
    predicted = classifier.classify_batch([x])[0].top_class
    table = np.zeros(2**n, dtype=bool)
    masks = np.arange(2**n)
    bit_matrix = ((masks[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)
    for start in range(0, 2**n, _BATCH):
        chunk = bit_matrix[start : start + _BATCH]
        batch = [
            InputTensor._from_trusted(mask_sites(x.data, baseline_data, np.flatnonzero(row)))
            for row in chunk
        ]
        preds = classifier.classify_batch(batch)
        table[start : start + _BATCH] = [p.top_class == predicted for p in preds]
    return table, predicted


def enumerate_minimal_sufficient(
    classifier, x: InputTensor, baseline: Baseline, limit: OracleLimit | None = None
) -> list[View]:
    """All views that keep the class and lose it on any single-site removal."""
    limit = limit or OracleLimit()
    n = x.n_sites
    if n > limit.max_n:
        raise OracleLimitError(f"n={n} exceeds enumeration limit max_n={limit.max_n}")
    baseline_data = baseline.materialize(x)
    table, _ = _sufficiency_table(classifier, x, baseline_data)

    found: list[View] = []
    for subset in range(1, 2**n):
        if not table[subset]:
            continue
        minimal = True
        bits = subset
        while bits:
            low = bits & -bits
            if table[subset ^ low]:
                minimal = False
                break
            bits ^= low
        if minimal:
            found.append(View.of(i for i in range(n) if subset >> i & 1))
    return found


@dataclass(frozen=True)
class OracleVerdict:
    """Greedy-vs-enumeration comparison for one instance."""

    views_minimal: tuple[bool, ...]
    disjoint: bool
    remainder_insufficient: bool
    degenerate: bool
    greedy_views: tuple[View, ...]
    oracle_views: tuple[View, ...]

    @property
    def passed(self) -> bool:
        return (
            not self.degenerate
            and all(self.views_minimal)
            and self.disjoint
            and self.remainder_insufficient
        )


def verify_greedy_against_oracle(
    classifier,
    x: InputTensor,
    baseline: Baseline,
    seed: int = 0,
    limit: OracleLimit | None = None,
) -> tuple[OracleVerdict, GreedyResult]:
    """Run greedy at singleton granularity and check it against enumeration.

    Greedy may legitimately find fewer views than the maximum disjoint
    packing; only membership in the minimal-sufficient list, disjointness,
    and remainder insufficiency are asserted.
    """
    limit = limit or OracleLimit()
    n = x.n_sites
    if n > limit.max_n:
        raise OracleLimitError(f"n={n} exceeds enumeration limit max_n={limit.max_n}")
    if max(4, n) > limit.max_groups:
        raise OracleLimitError(
            f"singleton splits need {n} groups, above max_groups={limit.max_groups}"
        )

    oracle_views = enumerate_minimal_sufficient(classifier, x, baseline, limit)
    oracle_sets = {view.as_set() for view in oracle_views}

    cfg = GreedyConfig(
        beta=max(4, n),
        strategy=SplitStrategy.grid(seed=seed),
        baseline=baseline,
    )
    result = greedy_msvs(classifier, x, cfg)
    views = result.msv_set.views

    views_minimal = tuple(view.as_set() in oracle_sets for view in views)
    covered: set[int] = set()
    disjoint = True
    for view in views:
        if covered.intersection(view.indices):
            disjoint = False
        covered.update(view.indices)
    remainder_insufficient = result.msv_set.remainder_class != result.msv_set.predicted_class

    verdict = OracleVerdict(
        views_minimal=views_minimal,
        disjoint=disjoint,
        remainder_insufficient=remainder_insufficient,
        degenerate=result.degenerate,
        greedy_views=tuple(views),
        oracle_views=tuple(oracle_views),
    )
    return verdict, result
