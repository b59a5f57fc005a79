"""Synthetic images, classifiers, and corpora for verification and tests.

Patch images carry bright rectangular evidence patches on a dim
background; the paired classifier fires exactly when at least one patch
is fully intact, so a black baseline makes every run non-degenerate and
the designed patch count is the ground-truth number of views.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InputTensor
from .errors import ParameterError
from .models import OverlapEvidenceClassifier, PatchEvidenceClassifier, SinglePixelClassifier

BACKGROUND = 0.3
PATCH_VALUE = 1.0


def patch_sites(height: int, width: int, top: int, left: int, ph: int, pw: int) -> tuple[int, ...]:
    """Row-major site indices of a ph x pw block at (top, left)."""
    if top + ph > height or left + pw > width:
        raise ParameterError("patch exceeds image bounds")
    return tuple(
        (top + r) * width + (left + c) for r in range(ph) for c in range(pw)
    )


def patch_image(
    height: int, width: int, patches: list[tuple[int, ...]], channels: int = 1
) -> InputTensor:
    """Dim background with bright values at the patch sites."""
    data = np.full((height, width, channels), BACKGROUND)
    for patch in patches:
        for site in patch:
            data[site // width, site % width, :] = PATCH_VALUE
    return InputTensor(data)


def place_disjoint_patches(
    height: int,
    width: int,
    n_patches: int,
    rng: np.random.Generator,
    ph: int = 2,
    pw: int = 2,
    gap: int = 1,
) -> list[tuple[int, ...]]:
    """Randomly place non-adjacent ph x pw patches (at least ``gap`` apart)."""
    placed: list[tuple[int, int]] = []
    patches: list[tuple[int, ...]] = []
    attempts = 0
    while len(patches) < n_patches:
        attempts += 1
        if attempts > 2000:
            raise ParameterError(
                f"could not place {n_patches} patches of {ph}x{pw} on {height}x{width}"
            )
        top = int(rng.integers(0, height - ph + 1))
        left = int(rng.integers(0, width - pw + 1))
        ok = all(
            abs(top - t0) >= ph + gap or abs(left - l0) >= pw + gap for t0, l0 in placed
        )
        if ok:
            placed.append((top, left))
            patches.append(patch_sites(height, width, top, left, ph, pw))
    return patches


@dataclass(frozen=True)
class PatchInstance:
    """An image, the classifier built for it, and the designed view count."""

    x: InputTensor
    classifier: PatchEvidenceClassifier
    n_patches: int
    patches: tuple[tuple[int, ...], ...]


def patch_instance(
    seed: int,
    n_patches: int,
    height: int = 12,
    width: int = 12,
    noise: float = 0.05,
    channels: int = 1,
) -> PatchInstance:
    rng = np.random.default_rng(seed)
    patches = place_disjoint_patches(height, width, n_patches, rng)
    x = patch_image(height, width, patches, channels=channels)
    classifier = PatchEvidenceClassifier(patches, noise=noise)
    return PatchInstance(
        x=x, classifier=classifier, n_patches=n_patches, patches=tuple(patches)
    )


def flat_patch_instance(seed: int, n_patches: int, n: int = 12, patch_size: int = 2):
    """Flat-vector analog used by the enumeration oracle (small n)."""
    if n_patches * patch_size > n:
        raise ParameterError("patches do not fit")
    rng = np.random.default_rng(seed)
    sites = rng.permutation(n)
    patches = [
        tuple(sorted(int(s) for s in sites[i * patch_size : (i + 1) * patch_size]))
        for i in range(n_patches)
    ]
    data = np.full(n, BACKGROUND)
    for patch in patches:
        data[list(patch)] = PATCH_VALUE
    x = InputTensor(data)
    return x, PatchEvidenceClassifier(patches, noise=0.05), patches


def single_pixel_instance(site: int = 0, n: int = 4):
    data = np.full(n, BACKGROUND)
    data[site] = 1.0
    return InputTensor(data), SinglePixelClassifier(site=site)


def overlap_instance(clauses=((0, 1), (1, 2)), n: int = 6):
    data = np.full(n, BACKGROUND)
    for clause in clauses:
        data[list(clause)] = 1.0
    return InputTensor(data), OverlapEvidenceClassifier([tuple(c) for c in clauses])


def evidence_slot_grid(height: int = 12, width: int = 12, slots: int = 6, ph: int = 2, pw: int = 2):
    """Fixed, well-separated slot positions used by the model-family corpora."""
    positions = [(1, 1), (1, 5), (1, 9), (7, 1), (7, 5), (7, 9)]
    if slots > len(positions):
        raise ParameterError("at most 6 slots supported")
    return [
        patch_sites(height, width, top, left, ph, pw) for top, left in positions[:slots]
    ]


def slot_image(
    height: int, width: int, slots: list[tuple[int, ...]], present: list[bool], channels: int = 1
) -> InputTensor:
    """Image with bright values only at the present slots."""
    data = np.full((height, width, channels), BACKGROUND)
    for slot, keep in zip(slots, present):
        if keep:
            for site in slot:
                data[site // width, site % width, :] = PATCH_VALUE
    return InputTensor(data)


def slot_corpus(
    n_images: int,
    seed: int,
    present_prob: float = 0.75,
    height: int = 12,
    width: int = 12,
    slots: int = 6,
):
    """Images with independently present slots; returns (images, presence mask)."""
    rng = np.random.default_rng(seed)
    slot_list = evidence_slot_grid(height, width, slots)
    presence = rng.random((n_images, slots)) < present_prob
    images = [
        slot_image(height, width, slot_list, presence[i].tolist()) for i in range(n_images)
    ]
    return images, presence, slot_list


def counted_slot_corpus(
    per_count: int,
    counts: tuple[int, ...],
    seed: int,
    height: int = 12,
    width: int = 12,
    slots: int = 6,
):
    """Images with an exact number of present slots per group."""
    rng = np.random.default_rng(seed)
    slot_list = evidence_slot_grid(height, width, slots)
    images = []
    intact_counts = []
    for count in counts:
        for _ in range(per_count):
            chosen = rng.choice(slots, size=count, replace=False)
            present = [i in set(chosen.tolist()) for i in range(slots)]
            images.append(slot_image(height, width, slot_list, present))
            intact_counts.append(count)
    return images, intact_counts, slot_list
