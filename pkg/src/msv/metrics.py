"""Label-free scores, accuracy-by-count tables, bootstrap intervals, rank correlation.

The label-free model-quality metric is the average view count over a
corpus; average confidence, entropy (natural log), and top-1-vs-top-2
margin are the comparison baselines. Degenerate runs are excluded from
aggregates by default and reported as a count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import MsvSet, Prediction
from .errors import ParameterError

METRIC_NAMES = ("msv_count", "confidence", "entropy", "margin")

# Direction of "better" per metric when inducing a model ordering.
HIGHER_IS_BETTER = {"msv_count": True, "confidence": True, "entropy": False, "margin": True}


@dataclass(frozen=True)
class ImageRecord:
    """Per-image scores; ``label`` is optional and only used for accuracy."""

    image_id: str
    predicted_class: int
    msv_count: int
    degenerate: bool
    confidence: float
    entropy: float
    margin: float
    n_sites: int
    query_count: int = 0
    label: int | None = None
    content_hash: str = ""

    @property
    def correct(self) -> bool | None:
        if self.label is None:
            return None
        return self.label == self.predicted_class


def score_image(
    prediction: Prediction,
    msv_set: MsvSet | None,
    *,
    image_id: str,
    n_sites: int,
    degenerate: bool = False,
    query_count: int = 0,
    label: int | None = None,
    content_hash: str = "",
) -> ImageRecord:
    """Fold one prediction and one view set into an ImageRecord."""
    count = msv_set.n_views if msv_set is not None else 0
    return ImageRecord(
        image_id=image_id,
        predicted_class=prediction.top_class,
        msv_count=count,
        degenerate=degenerate,
        confidence=prediction.confidence,
        entropy=prediction.entropy,
        margin=prediction.margin,
        n_sites=n_sites,
        query_count=query_count,
        label=label,
        content_hash=content_hash,
    )


@dataclass(frozen=True)
class CountBucket:
    """One row of the accuracy-by-count table."""

    bucket: str
    n: int
    accuracy: float | None
    ci_half_width: float | None


@dataclass(frozen=True)
class AccuracyByCountTable:
    rows: tuple[CountBucket, ...]

    def row(self, bucket: str) -> CountBucket:
        for r in self.rows:
            if r.bucket == bucket:
                return r
        raise KeyError(bucket)


def proportion_ci_half_width(p: float, n: int) -> float:
    """95% normal-approximation half width: 1.96 * sqrt(p(1-p)/n)."""
    return 1.96 * math.sqrt(p * (1.0 - p) / n)


def _bucket_of(count: int) -> str:
    return str(count) if count < 10 else "10+"


BUCKETS = tuple(str(i) for i in range(1, 10)) + ("10+",)


def accuracy_by_count(
    records: Sequence[ImageRecord], include_degenerate: bool = False
) -> AccuracyByCountTable:
    """Group labeled records by view count and report accuracy with 95% CIs.

    Degenerate records are dropped unless ``include_degenerate``, in which
    case they count as if every site were a view (bucket 10+ for any
    realistically sized input).
    """
    grouped: dict[str, list[bool]] = {b: [] for b in BUCKETS}
    for rec in records:
        if rec.label is None:
            raise ParameterError(f"record {rec.image_id} has no label")
        if rec.degenerate:
            if not include_degenerate:
                continue
            bucket = _bucket_of(rec.n_sites)
        else:
            bucket = _bucket_of(rec.msv_count)
        grouped[bucket].append(bool(rec.correct))

    rows = []
    for bucket in BUCKETS:
        hits = grouped[bucket]
        if not hits:
            rows.append(CountBucket(bucket=bucket, n=0, accuracy=None, ci_half_width=None))
            continue
        p = float(np.mean(hits))
        rows.append(
            CountBucket(
                bucket=bucket,
                n=len(hits),
                accuracy=p,
                ci_half_width=proportion_ci_half_width(p, len(hits)),
            )
        )
    return AccuracyByCountTable(rows=tuple(rows))


def bootstrap_mean_interval(
    values: Sequence[float],
    resamples: int = 10000,
    lower: float = 1.0,
    upper: float = 99.0,
    seed: int = 0,
    subsample_size: int | None = None,
) -> tuple[float, float]:
    """Percentile interval of resampled means, deterministic under the seed.

    ``subsample_size`` draws resamples smaller than the data, which is how
    the small-sample behavior of the metric is studied.
    """
    data = np.asarray(list(values), dtype=np.float64)
    if data.size == 0:
        raise ParameterError("bootstrap needs at least one value")
    if not 0.0 <= lower < upper <= 100.0:
        raise ParameterError("percentiles must satisfy 0 <= lower < upper <= 100")
    m = subsample_size if subsample_size is not None else data.size
    if m < 1:
        raise ParameterError("subsample_size must be at least 1")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, data.size, size=(int(resamples), int(m)))
    means = data[idx].mean(axis=1)
    low, high = np.percentile(means, [lower, upper])
    return float(low), float(high)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks, ties given the mean of their rank run."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation with average-rank tie handling.

    Returns NaN when either input is constant (the correlation is
    undefined there).
    """
    x = np.asarray(list(xs), dtype=np.float64)
    y = np.asarray(list(ys), dtype=np.float64)
    if x.size != y.size:
        raise ParameterError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ParameterError("need at least 2 pairs")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float((rx * rx).sum()) * float((ry * ry).sum()))
    if denom == 0.0:
        return float("nan")
    return float((rx * ry).sum() / denom)


@dataclass(frozen=True)
class MetricSummary:
    """Per-model aggregate: mean and bootstrap interval per metric."""

    model: str
    sample_size: int
    n_degenerate: int
    means: dict[str, float]
    intervals: dict[str, tuple[float, float]]
    accuracy: float | None = None


def summarize_records(
    records: Sequence[ImageRecord],
    model: str = "model",
    resamples: int = 10000,
    seed: int = 0,
    subsample_size: int | None = None,
    include_degenerate: bool = False,
) -> MetricSummary:
    """Aggregate per-image records into means with bootstrap intervals.

    Records are sorted by image id first, so the seeded bootstrap (and with
    it the whole summary) is independent of input order.
    """
    records = sorted(records, key=lambda r: r.image_id)
    kept = [r for r in records if include_degenerate or not r.degenerate]
    n_degenerate = sum(1 for r in records if r.degenerate)
    if not kept:
        raise ParameterError("no records to summarize (all degenerate?)")

    def column(name: str) -> list[float]:
        if name == "msv_count":
            return [float(r.n_sites if r.degenerate else r.msv_count) for r in kept]
        return [float(getattr(r, name)) for r in kept]

    means = {}
    intervals = {}
    for name in METRIC_NAMES:
        vals = column(name)
        means[name] = float(np.mean(vals))
        intervals[name] = bootstrap_mean_interval(
            vals, resamples=resamples, seed=seed, subsample_size=subsample_size
        )
    # Accuracy measures the model itself, so degenerate runs still count.
    labeled = [r for r in records if r.label is not None]
    accuracy = float(np.mean([r.correct for r in labeled])) if labeled else None
    return MetricSummary(
        model=model,
        sample_size=len(kept),
        n_degenerate=n_degenerate,
        means=means,
        intervals=intervals,
        accuracy=accuracy,
    )


@dataclass(frozen=True)
class MetricRanking:
    """One metric's agreement with accuracy across models."""

    metric: str
    rho: float
    ordering: tuple[str, ...]
    ranks: tuple[float, ...]
    defined: bool


def rank_models(summaries: Sequence[MetricSummary]) -> dict[str, MetricRanking]:
    """Spearman correlation with accuracy and induced ordering, per metric.

    Models with equal scores share averaged ranks; metrics that are
    constant across models are flagged as undefined.
    """
    summaries = list(summaries)
    if len(summaries) < 2:
        raise ParameterError("ranking needs at least 2 models")
    if any(s.accuracy is None for s in summaries):
        raise ParameterError("every model summary needs an accuracy for ranking")
    accuracies = [s.accuracy for s in summaries]

    out: dict[str, MetricRanking] = {}
    for name in METRIC_NAMES:
        scores = [s.means[name] for s in summaries]
        rho = spearman(scores, accuracies)
        direction = 1.0 if HIGHER_IS_BETTER[name] else -1.0
        keyed = sorted(
            range(len(summaries)), key=lambda i: (-direction * scores[i], summaries[i].model)
        )
        ordering = tuple(summaries[i].model for i in keyed)
        ranks = _average_ranks(np.asarray([-direction * s for s in scores]))
        out[name] = MetricRanking(
            metric=name,
            rho=rho,
            ordering=ordering,
            ranks=tuple(float(ranks[i]) for i in keyed),
            defined=not math.isnan(rho),
        )
    return out
