"""Domain types (inputs, baselines, views, predictions) and the masking rule.

Site indices are 0-based and row-major for images. A site of an (H, W, C)
image is one spatial position; masking a site replaces all C channel values
at that position with the baseline.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError, ShapeMismatchError, SiteIndexError

PROB_TOL = 1e-6

DEFAULT_GRAY = 0.5


@dataclass(frozen=True)
class InputTensor:
    """A classifier input: an (H, W, C) image or a flat length-n vector.

    Image values are expected in [0, 1]; flat vectors are unconstrained
    apart from finiteness.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim not in (1, 3):
            raise ParameterError(f"input must be (n,) or (H, W, C), got shape {arr.shape}")
        if arr.size == 0:
            raise ParameterError("input must have at least one site")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("input values must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def _from_trusted(cls, arr: np.ndarray) -> "InputTensor":
        """Adopt a freshly built, finite float64 array without re-validation.

        Internal fast path for masked candidates; the caller must not keep a
        writable reference.
        """
        obj = object.__new__(cls)
        arr.setflags(write=False)
        object.__setattr__(obj, "data", arr)
        return obj

    @property
    def is_image(self) -> bool:
        return self.data.ndim == 3

    @property
    def n_sites(self) -> int:
        if self.is_image:
            return self.data.shape[0] * self.data.shape[1]
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[0] if self.is_image else 1

    @property
    def width(self) -> int:
        return self.data.shape[1] if self.is_image else self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2] if self.is_image else 1

    def site_values(self) -> np.ndarray:
        """Per-site scalar values: channel mean for images, raw values otherwise."""
        if self.is_image:
            if self.data.shape[2] == 1:
                return self.data.reshape(-1)
            return self.data.mean(axis=2).reshape(-1)
        return self.data

    def site_coords(self) -> np.ndarray:
        """Integer coordinates per site: (n, 2) rows/cols for images, (n, 1) otherwise."""
        if self.is_image:
            h, w = self.data.shape[:2]
            rows, cols = np.divmod(np.arange(h * w), w)
            return np.stack([rows, cols], axis=1)
        return np.arange(self.n_sites).reshape(-1, 1)


@dataclass(frozen=True)
class View:
    """A non-empty set of site indices; the unmasked region of an input."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise ParameterError("a view must contain at least one site")
        if any(i < 0 for i in idx):
            raise SiteIndexError(f"negative site index in view: {min(idx)}")
        if len(set(idx)) != len(idx):
            raise ParameterError("duplicate site indices in view")
        object.__setattr__(self, "indices", tuple(sorted(idx)))

    @classmethod
    def of(cls, indices: Iterable[int]) -> "View":
        return cls(tuple(indices))

    @classmethod
    def full(cls, n_sites: int) -> "View":
        return cls(tuple(range(n_sites)))

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "View":
        return cls(tuple(int(i) for i in np.flatnonzero(mask)))

    def to_mask(self, n_sites: int) -> np.ndarray:
        if self.indices[-1] >= n_sites:
            raise SiteIndexError(
                f"view site {self.indices[-1]} out of range for {n_sites} sites"
            )
        mask = np.zeros(n_sites, dtype=bool)
        mask[list(self.indices)] = True
        return mask

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, site: int) -> bool:
        return site in set(self.indices)

    def as_set(self) -> frozenset[int]:
        return frozenset(self.indices)


@dataclass(frozen=True)
class Baseline:
    """The fill value for masked sites.

    ``dataset_mean`` uses per-channel statistics when supplied and falls back
    to mid-range gray with a warning. ``random_normal`` is reproducible: the
    same seed always materializes the same values.
    """

    kind: str
    channel_stats: tuple[float, ...] | None = None
    seed: int = 0
    mean: float = 0.5
    std: float = 0.25
    values: tuple[float, ...] | None = None

    _KINDS = ("dataset_mean", "white", "black", "random_normal", "constant")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ParameterError(f"unknown baseline kind {self.kind!r}")

    @classmethod
    def dataset_mean(cls, channel_stats: Sequence[float] | None = None) -> "Baseline":
        stats = None if channel_stats is None else tuple(float(v) for v in channel_stats)
        return cls(kind="dataset_mean", channel_stats=stats)

    @classmethod
    def white(cls) -> "Baseline":
        return cls(kind="white")

    @classmethod
    def black(cls) -> "Baseline":
        return cls(kind="black")

    @classmethod
    def random_normal(cls, seed: int = 0, mean: float = 0.5, std: float = 0.25) -> "Baseline":
        return cls(kind="random_normal", seed=int(seed), mean=float(mean), std=float(std))

    @classmethod
    def constant(cls, values: Sequence[float]) -> "Baseline":
        return cls(kind="constant", values=tuple(float(v) for v in np.asarray(values).reshape(-1)))

    def materialize(self, x: InputTensor) -> np.ndarray:
        shape = x.data.shape
        if self.kind == "white":
            return np.ones(shape)
        if self.kind == "black":
            return np.zeros(shape)
        if self.kind == "dataset_mean":
            stats = self.channel_stats
            if stats is None:
                warnings.warn(
                    "dataset_mean baseline has no statistics; using mid-range gray",
                    stacklevel=2,
                )
                return np.full(shape, DEFAULT_GRAY)
            if x.is_image:
                if len(stats) != x.channels:
                    raise ShapeMismatchError(
                        f"baseline has {len(stats)} channel means, input has {x.channels} channels"
                    )
                return np.broadcast_to(np.asarray(stats), shape).copy()
            if len(stats) != 1:
                raise ShapeMismatchError("flat inputs take a single-value dataset mean")
            return np.full(shape, stats[0])
        if self.kind == "random_normal":
            rng = np.random.default_rng(self.seed)
            vals = rng.normal(self.mean, self.std, size=shape)
            if x.is_image:
                vals = np.clip(vals, 0.0, 1.0)
            return vals
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.size == x.data.size:
            return vals.reshape(shape).copy()
        raise ShapeMismatchError(
            f"constant baseline has {vals.size} values, input has {x.data.size}"
        )


@dataclass(frozen=True)
class Prediction:
    """Post-softmax class scores; ties at the top break to the lowest index."""

    scores: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if arr.size < 2:
            raise ParameterError("a prediction needs at least 2 classes")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("prediction scores must be finite")
        if arr.min() < -PROB_TOL:
            raise ParameterError(f"negative probability {arr.min()}")
        if abs(arr.sum() - 1.0) > PROB_TOL:
            raise ParameterError(f"probabilities sum to {arr.sum()}, not 1")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)

    @classmethod
    def _from_trusted(cls, arr: np.ndarray) -> "Prediction":
        """Adopt a normalized score row without re-validation (internal)."""
        obj = object.__new__(cls)
        arr.setflags(write=False)
        object.__setattr__(obj, "scores", arr)
        return obj

    @property
    def n_classes(self) -> int:
        return self.scores.size

    @property
    def top_class(self) -> int:
        return int(np.argmax(self.scores))

    @property
    def confidence(self) -> float:
        return float(self.scores.max())

    @property
    def margin(self) -> float:
        top2 = np.sort(self.scores)[-2:]
        return float(top2[1] - top2[0])

    @property
    def entropy(self) -> float:
        p = self.scores[self.scores > 0.0]
        return float(-(p * np.log(p)).sum())


@dataclass(frozen=True)
class MsvSet:
    """Pairwise-disjoint views in discovery order, plus the run's class bookkeeping.

    ``remainder_class`` is the class of the input with every view masked out.
    For a normally completed (non-degenerate) run it differs from
    ``predicted_class``; validation is the job of ``is_valid_msv_set``.
    """

    views: tuple[View, ...]
    predicted_class: int
    remainder_class: int

    def __post_init__(self):
        object.__setattr__(self, "views", tuple(self.views))
        seen: set[int] = set()
        for view in self.views:
            overlap = seen.intersection(view.indices)
            if overlap:
                raise ParameterError(f"views overlap at sites {sorted(overlap)[:4]}")
            seen.update(view.indices)

    @property
    def n_views(self) -> int:
        return len(self.views)

    def covered_sites(self) -> frozenset[int]:
        out: set[int] = set()
        for view in self.views:
            out.update(view.indices)
        return frozenset(out)

    def remainder_mask(self, n_sites: int) -> np.ndarray:
        mask = np.ones(n_sites, dtype=bool)
        covered = list(self.covered_sites())
        if covered:
            if max(covered) >= n_sites:
                raise SiteIndexError("view sites out of range for remainder mask")
            mask[covered] = False
        return mask


def _site_indices(view) -> np.ndarray:
    """Accept a View, a sequence of sites, or None/empty (the full mask)."""
    if view is None:
        return np.empty(0, dtype=np.intp)
    if isinstance(view, View):
        return np.asarray(view.indices, dtype=np.intp)
    if isinstance(view, np.ndarray) and view.dtype == bool:
        return np.flatnonzero(view)
    return np.asarray(sorted(int(i) for i in view), dtype=np.intp)


def mask_sites(x_data: np.ndarray, baseline_data: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """Raw masking: baseline everywhere except the kept site indices."""
    out = baseline_data.copy()
    if keep.size:
        if x_data.ndim == 3:
            w = x_data.shape[1]
            rows, cols = np.divmod(keep, w)
            out[rows, cols, :] = x_data[rows, cols, :]
        else:
            out[keep] = x_data[keep]
    return out


def mask_input(x: InputTensor, view, baseline) -> InputTensor:
    """Keep the input's values at the view's sites and the baseline elsewhere.

    ``view`` may be a View, any iterable of site indices, or None / an empty
    iterable (which yields the fully masked input). ``baseline`` is either a
    Baseline or an already materialized array of the input's shape.
    """
    if isinstance(baseline, Baseline):
        b = baseline.materialize(x)
    else:
        b = np.asarray(baseline, dtype=np.float64)
    if b.shape != x.data.shape:
        raise ShapeMismatchError(f"baseline shape {b.shape} != input shape {x.data.shape}")
    keep = _site_indices(view)
    if keep.size:
        if keep.min() < 0 or keep.max() >= x.n_sites:
            raise SiteIndexError(
                f"view sites must lie in [0, {x.n_sites}), got [{keep.min()}, {keep.max()}]"
            )
    return InputTensor(mask_sites(x.data, b, keep))


def is_sufficient(classifier, x: InputTensor, view, baseline, predicted_class: int) -> bool:
    """True iff the masked input still gets the original predicted class.

    ``predicted_class`` is computed once by the caller and passed in; it is
    never recomputed here.
    """
    masked = mask_input(x, view, baseline)
    return classifier.classify_batch([masked])[0].top_class == int(predicted_class)
