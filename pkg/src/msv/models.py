"""The black-box classifier boundary and the synthetic classifiers used to test it.

A classifier maps a batch of inputs to a batch of post-softmax predictions
and counts every evaluation it performs. Synthetic classifiers are pure,
deterministic functions of the (masked) input values, so masking a site is
the only way to change their output.
"""

from __future__ import annotations

import itertools
import threading
from typing import Callable, Sequence

import numpy as np

from .core import InputTensor, Prediction
from .errors import BackendError, ParameterError


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class Classifier:
    """Base class: subclasses implement ``_predict_batch``.

    ``classify_batch`` preserves input order, normalizes validation, and
    advances the query counter by the batch size. The counter is locked so
    instances can be shared across worker threads.
    """

    def __init__(self, n_classes: int):
        if n_classes < 2:
            raise ParameterError("a classifier needs at least 2 classes")
        self.n_classes = int(n_classes)
        self._queries = 0
        self._lock = threading.Lock()

    @property
    def query_count(self) -> int:
        return self._queries

    def reset_query_count(self) -> None:
        with self._lock:
            self._queries = 0

    def classify_batch(self, batch: Sequence[InputTensor]) -> list[Prediction]:
        batch = list(batch)
        if not batch:
            raise ParameterError("empty batch")
        preds = self._predict_batch(batch)
        if len(preds) != len(batch):
            raise BackendError(
                f"backend returned {len(preds)} predictions for {len(batch)} inputs"
            )
        with self._lock:
            self._queries += len(batch)
        return preds

    def _predict_batch(self, batch: list[InputTensor]) -> list[Prediction]:
        raise NotImplementedError


class ConstantClassifier(Classifier):
    """Always predicts the same class with a one-hot score vector."""

    def __init__(self, class_index: int = 0, n_classes: int = 2):
        super().__init__(n_classes)
        if not 0 <= class_index < n_classes:
            raise ParameterError("class_index out of range")
        self.class_index = int(class_index)

    def _predict_batch(self, batch):
        scores = np.zeros(self.n_classes)
        scores[self.class_index] = 1.0
        return [Prediction(scores) for _ in batch]


class SinglePixelClassifier(Classifier):
    """Two classes decided by one site's value against a threshold.

    Class 1 fires when the site's (channel-mean) value exceeds the
    threshold; otherwise class 0.
    """

    def __init__(self, site: int, threshold: float = 0.5, confidence: float = 0.9):
        super().__init__(2)
        if not 0.5 < confidence < 1.0:
            raise ParameterError("confidence must be in (0.5, 1)")
        self.site = int(site)
        self.threshold = float(threshold)
        self.confidence = float(confidence)

    def _predict_batch(self, batch):
        out = []
        hi = np.array([1.0 - self.confidence, self.confidence])
        lo = np.array([self.confidence, 1.0 - self.confidence])
        for item in batch:
            if self.site >= item.n_sites:
                raise ParameterError(f"site {self.site} out of range for input")
            fired = item.site_values()[self.site] > self.threshold
            out.append(Prediction(hi if fired else lo))
        return out


def _sigmoid(z: float) -> float:
    return float(1.0 / (1.0 + np.exp(-z)))


class _EvidenceClassifier(Classifier):
    """Shared scoring for patch- and clause-based synthetic classifiers.

    Class 1's logit grows with the number of fully intact evidence groups;
    a small noise term couples the score to the overall brightness so that
    distinct masks get distinct scores. Masking can only lower the logit,
    which keeps the greedy termination test exact for these classifiers.
    """

    def __init__(self, groups, sharpness: float, noise: float, site_threshold: float):
        super().__init__(2)
        groups = tuple(tuple(sorted(int(i) for i in g)) for g in groups)
        if not groups or any(not g for g in groups):
            raise ParameterError("evidence groups must be non-empty")
        if sharpness <= 0:
            raise ParameterError("sharpness must be positive")
        if not 0 <= noise < sharpness / 2:
            # The margin at one intact group is sharpness/2; noise must not flip it.
            raise ParameterError("noise must be in [0, sharpness/2)")
        self.groups = groups
        self._group_idx = [np.asarray(g, dtype=np.intp) for g in groups]
        self.sharpness = float(sharpness)
        self.noise = float(noise)
        self.site_threshold = float(site_threshold)

    def intact_count(self, item: InputTensor) -> int:
        vals = item.site_values()
        return sum(1 for g in self._group_idx if np.all(vals[g] > self.site_threshold))

    def _predict_batch(self, batch):
        vals = np.clip(np.stack([item.site_values() for item in batch]), 0.0, 1.0)
        intact = np.zeros(len(batch), dtype=np.float64)
        for idx in self._group_idx:
            intact += (vals[:, idx] > self.site_threshold).all(axis=1)
        logits = self.sharpness * (intact - 0.5) + self.noise * vals.mean(axis=1)
        p1 = 1.0 / (1.0 + np.exp(-logits))
        scores = np.stack([1.0 - p1, p1], axis=1)
        return [Prediction._from_trusted(row.copy()) for row in scores]


class PatchEvidenceClassifier(_EvidenceClassifier):
    """Class 1 iff at least one of several disjoint patches is fully intact."""

    def __init__(
        self,
        patches: Sequence[Sequence[int]],
        sharpness: float = 4.0,
        noise: float = 0.05,
        site_threshold: float = 0.5,
    ):
        super().__init__(patches, sharpness, noise, site_threshold)
        seen: set[int] = set()
        for patch in self.groups:
            if seen.intersection(patch):
                raise ParameterError("patches must be pairwise disjoint")
            seen.update(patch)

    @property
    def patches(self):
        return self.groups


class OverlapEvidenceClassifier(_EvidenceClassifier):
    """Class 1 iff any clause of sites is fully intact; clauses may overlap."""

    def __init__(
        self,
        clauses: Sequence[Sequence[int]],
        sharpness: float = 4.0,
        noise: float = 0.05,
        site_threshold: float = 0.5,
    ):
        super().__init__(clauses, sharpness, noise, site_threshold)

    @property
    def clauses(self):
        return self.groups


def evidence_count(classifier) -> int:
    """Designed number of independent sufficient views.

    For disjoint patches that is the patch count; for overlapping clauses
    it is the size of the largest pairwise-disjoint clause packing, found
    by brute force.
    """
    if isinstance(classifier, PatchEvidenceClassifier):
        return len(classifier.patches)
    if isinstance(classifier, OverlapEvidenceClassifier):
        clauses = classifier.clauses
        if len(clauses) > 16:
            raise ParameterError("too many clauses for brute-force packing")
        best = 0
        for r in range(len(clauses), 0, -1):
            if r <= best:
                break
            for combo in itertools.combinations(clauses, r):
                sets = [set(c) for c in combo]
                if all(a.isdisjoint(b) for a, b in itertools.combinations(sets, 2)):
                    best = r
                    break
        return best
    raise ParameterError(f"evidence_count only applies to evidence classifiers, got {type(classifier).__name__}")


class TemperatureWrapper(Classifier):
    """Rescales another classifier's scores with a softmax temperature.

    Temperatures below 1 sharpen the distribution (overconfidence) without
    changing the predicted class.
    """

    def __init__(self, inner: Classifier, temperature: float):
        super().__init__(inner.n_classes)
        if temperature <= 0:
            raise ParameterError("temperature must be positive")
        self.inner = inner
        self.temperature = float(temperature)

    def _predict_batch(self, batch):
        preds = self.inner._predict_batch(batch)
        out = []
        for pred in preds:
            logp = np.log(np.clip(pred.scores, 1e-12, None))
            out.append(Prediction(softmax(logp / self.temperature)))
        return out


class DetectionAdapter(Classifier):
    """Turns a detector's box probability into a two-class classifier.

    Class 0 means "detected" and wins exactly when the extracted box
    probability is at or above the threshold; scores are the softmax of
    the (probability, threshold) pair, which preserves that comparison.
    """

    def __init__(self, box_probability: Callable[[InputTensor], float], threshold: float):
        super().__init__(2)
        if not 0.0 < threshold < 1.0:
            raise ParameterError("detection threshold must be in (0, 1)")
        self.box_probability = box_probability
        self.threshold = float(threshold)

    def _predict_batch(self, batch):
        out = []
        for item in batch:
            p = float(self.box_probability(item))
            if not np.isfinite(p):
                raise BackendError("box probability extractor returned a non-finite value")
            out.append(Prediction(softmax(np.array([p, self.threshold]))))
        return out


class BoxBrightnessDetector(DetectionAdapter):
    """Toy detector: box probability is the mean value inside a pixel box."""

    def __init__(self, box: tuple[int, int, int, int], threshold: float):
        r0, c0, r1, c1 = box
        if r0 >= r1 or c0 >= c1:
            raise ParameterError("box must have positive extent")
        self.box = (int(r0), int(c0), int(r1), int(c1))

        def probability(item: InputTensor) -> float:
            if not item.is_image:
                raise ParameterError("box detector needs image inputs")
            region = item.data[self.box[0] : self.box[2], self.box[1] : self.box[3], :]
            return float(np.clip(region.mean(), 0.0, 1.0))

        super().__init__(probability, threshold)
