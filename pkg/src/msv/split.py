"""Partitioning a view's sites into at most ``beta`` groups.

Three strategies:

* ``slic``: superpixel-style k-means over (L, a, b, row, col) features,
  restricted to the view's sites, with seeded center jitter and a
  connectivity cleanup pass.
* ``voronoi``: image-independent cells around seed sites drawn uniformly
  at random (seeded) from the view.
* ``grid``: axis-aligned near-equal tiling of the view's bounding box.

Every strategy returns an exact partition: groups are non-empty, pairwise
disjoint, and cover the view. When the view has at most ``beta`` sites the
partition is forced to singletons, which makes group-level minimality at
``beta >= |view|`` coincide with element-level minimality.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import InputTensor, View
from .errors import ParameterError

_SPLIT_KINDS = ("slic", "voronoi", "grid")


def derive_seed(base_seed: int, depth: int) -> int:
    """Stable per-call seed from a run seed and a recursion depth."""
    ss = np.random.SeedSequence(entropy=[int(base_seed) & (2**64 - 1), int(depth)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SplitStrategy:
    """A deterministic, seeded view partitioner."""

    kind: str
    seed: int = 0
    compactness: float = 10.0
    max_kmeans_iters: int = 10

    def __post_init__(self):
        if self.kind not in _SPLIT_KINDS:
            raise ParameterError(f"unknown split kind {self.kind!r}")
        if self.compactness <= 0:
            raise ParameterError("compactness must be positive")
        if self.max_kmeans_iters < 1:
            raise ParameterError("max_kmeans_iters must be at least 1")

    @classmethod
    def slic(cls, seed: int = 0, compactness: float = 10.0, max_kmeans_iters: int = 10) -> "SplitStrategy":
        return cls(kind="slic", seed=seed, compactness=compactness, max_kmeans_iters=max_kmeans_iters)

    @classmethod
    def voronoi(cls, seed: int = 0) -> "SplitStrategy":
        return cls(kind="voronoi", seed=seed)

    @classmethod
    def grid(cls, seed: int = 0) -> "SplitStrategy":
        return cls(kind="grid", seed=seed)

    def with_seed(self, seed: int) -> "SplitStrategy":
        return replace(self, seed=int(seed))


def split(strategy: SplitStrategy, view: View, x: InputTensor, beta: int) -> list[tuple[int, ...]]:
    """Partition the view into at most ``beta`` groups, ordered by smallest site."""
    if beta < 2:
        raise ParameterError(f"beta must be at least 2, got {beta}")
    sites = np.asarray(view.indices, dtype=np.intp)
    if sites[-1] >= x.n_sites:
        raise ParameterError(f"view site {sites[-1]} out of range for input with {x.n_sites} sites")
    if sites.size <= beta:
        return [(int(s),) for s in sites]

    if strategy.kind == "grid":
        labels = _grid_labels(sites, x, beta)
    elif strategy.kind == "voronoi":
        labels = _voronoi_labels(sites, x, beta, strategy.seed)
    else:
        labels = _slic_labels(sites, x, beta, strategy)
    return _labels_to_groups(sites, labels)


def _labels_to_groups(sites: np.ndarray, labels: np.ndarray) -> list[tuple[int, ...]]:
    groups: dict[int, list[int]] = {}
    for site, lab in zip(sites.tolist(), labels.tolist()):
        groups.setdefault(lab, []).append(site)
    ordered = sorted(groups.values(), key=lambda g: g[0])
    return [tuple(g) for g in ordered]


def _grid_dims(h: int, w: int, beta: int) -> tuple[int, int]:
    """Rows x cols of tiles, maximizing tile count <= beta with near-square tiles."""
    best = (1, 1)
    best_key = (-1, float("inf"))
    for rows in range(1, min(beta, h) + 1):
        cols = min(beta // rows, w)
        if cols < 1:
            continue
        squareness = abs(np.log((h / rows) / (w / cols)))
        key = (rows * cols, -squareness)
        if key > (best_key[0], -best_key[1]):
            best = (rows, cols)
            best_key = (rows * cols, squareness)
    return best


def _edges(lo: int, hi: int, parts: int) -> np.ndarray:
    """Integer boundaries splitting [lo, hi] into near-equal runs."""
    return lo + np.round(np.linspace(0, hi - lo + 1, parts + 1)).astype(np.intp)


def _grid_labels(sites: np.ndarray, x: InputTensor, beta: int) -> np.ndarray:
    coords = x.site_coords()[sites]
    if coords.shape[1] == 1:
        pos = coords[:, 0]
        lo, hi = int(pos.min()), int(pos.max())
        parts = min(beta, hi - lo + 1)
        edges = _edges(lo, hi, parts)
        return np.searchsorted(edges, pos, side="right") - 1
    rows, cols = coords[:, 0], coords[:, 1]
    rmin, rmax = int(rows.min()), int(rows.max())
    cmin, cmax = int(cols.min()), int(cols.max())
    gr, gc = _grid_dims(rmax - rmin + 1, cmax - cmin + 1, beta)
    row_edges = _edges(rmin, rmax, gr)
    col_edges = _edges(cmin, cmax, gc)
    ti = np.searchsorted(row_edges, rows, side="right") - 1
    tj = np.searchsorted(col_edges, cols, side="right") - 1
    return ti * gc + tj


def _voronoi_labels(sites: np.ndarray, x: InputTensor, beta: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    coords = x.site_coords()[sites].astype(np.int64)
    picks = rng.choice(sites.size, size=beta, replace=False)
    centers = coords[picks]
    # Exact integer distances keep ties exact; argmin takes the lowest seed index.
    d2 = ((coords[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def _rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """sRGB in [0,1] to CIELAB (D65), vectorized over leading axes."""
    srgb = np.clip(rgb, 0.0, 1.0)
    linear = np.where(srgb <= 0.04045, srgb / 12.92, ((srgb + 0.055) / 1.055) ** 2.4)
    m = np.array(
        [
            [0.4124564, 0.3575761, 0.1804375],
            [0.2126729, 0.7151522, 0.0721750],
            [0.0193339, 0.1191920, 0.9503041],
        ]
    )
    xyz = linear @ m.T
    white = np.array([0.95047, 1.0, 1.08883])
    t = xyz / white
    f = np.where(t > (6 / 29) ** 3, np.cbrt(t), t / (3 * (6 / 29) ** 2) + 4 / 29)
    lab = np.empty_like(f)
    lab[..., 0] = 116 * f[..., 1] - 16
    lab[..., 1] = 500 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200 * (f[..., 1] - f[..., 2])
    return lab


def _site_colors(sites: np.ndarray, x: InputTensor) -> np.ndarray:
    """Per-site color features on an L-like scale."""
    if x.is_image and x.channels == 3:
        flat = x.data.reshape(-1, 3)[sites]
        return _rgb_to_lab(flat)
    vals = x.site_values()[sites]
    return (100.0 * np.clip(vals, 0.0, 1.0)).reshape(-1, 1)


def _slic_labels(sites: np.ndarray, x: InputTensor, beta: int, strategy: SplitStrategy) -> np.ndarray:
    rng = np.random.default_rng(strategy.seed)
    coords = x.site_coords()[sites].astype(np.float64)
    colors = _site_colors(sites, x)
    interval = float(np.sqrt(sites.size / beta))
    spatial_weight = strategy.compactness / interval
    features = np.hstack([colors, coords * spatial_weight])

    centers = _init_centers(sites, coords, beta, interval, rng)
    center_feats = features[centers]

    labels = np.zeros(sites.size, dtype=np.intp)
    k = center_feats.shape[0]
    for _ in range(strategy.max_kmeans_iters):
        d2 = ((features[:, None, :] - center_feats[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(center_feats)
        np.add.at(sums, labels, features)
        occupied = counts > 0
        center_feats[occupied] = sums[occupied] / counts[occupied, None]

    labels = _compact_labels(labels)
    return _enforce_connectivity(sites, labels, x, beta)


def _init_centers(
    sites: np.ndarray, coords: np.ndarray, beta: int, interval: float, rng: np.random.Generator
) -> np.ndarray:
    """Regular-grid center positions inside the view's bounding region, with
    seeded jitter, snapped to the nearest view site."""
    ndim = coords.shape[1]
    if ndim == 1:
        lo, hi = coords[:, 0].min(), coords[:, 0].max()
        ideal = np.linspace(lo, hi, beta + 2)[1:-1].reshape(-1, 1)
    else:
        h = coords[:, 0].max() - coords[:, 0].min() + 1
        w = coords[:, 1].max() - coords[:, 1].min() + 1
        gr, gc = _grid_dims(int(h), int(w), beta)
        r_centers = coords[:, 0].min() + (np.arange(gr) + 0.5) * h / gr
        c_centers = coords[:, 1].min() + (np.arange(gc) + 0.5) * w / gc
        ideal = np.stack(
            [np.repeat(r_centers, gc), np.tile(c_centers, gr)], axis=1
        )
    ideal = ideal + rng.uniform(-interval / 2.0, interval / 2.0, size=ideal.shape)
    d2 = ((coords[:, None, :] - ideal[None, :, :]) ** 2).sum(axis=2)
    chosen: list[int] = []
    taken = np.zeros(sites.size, dtype=bool)
    for col in range(d2.shape[1]):
        dist = np.where(taken, np.inf, d2[:, col])
        pick = int(np.argmin(dist))
        if np.isinf(dist[pick]):
            break
        chosen.append(pick)
        taken[pick] = True
    if not chosen:
        chosen = [0]
    return np.asarray(chosen, dtype=np.intp)


def _compact_labels(labels: np.ndarray) -> np.ndarray:
    """Renumber labels to 0..k-1 in order of first appearance."""
    _, inverse = np.unique(labels, return_inverse=True)
    return inverse.astype(np.intp)


def _neighbor_pairs(sites: np.ndarray, x: InputTensor) -> tuple[np.ndarray, np.ndarray]:
    """Pairs (i, j) of positions in ``sites`` that are 4-adjacent in the input.

    ``sites`` is sorted, so neighbors resolve with searchsorted.
    """
    firsts, seconds = [], []
    if x.is_image:
        w = x.width
        offsets = [(1, (sites + 1) % w != 0), (w, np.ones(sites.size, dtype=bool))]
    else:
        offsets = [(1, np.ones(sites.size, dtype=bool))]
    for off, allowed in offsets:
        targets = sites + off
        pos = np.searchsorted(sites, targets)
        found = (pos < sites.size) & allowed
        found[found] &= sites[pos[found]] == targets[found]
        firsts.append(np.flatnonzero(found))
        seconds.append(pos[found])
    return (
        np.concatenate(firsts).astype(np.intp),
        np.concatenate(seconds).astype(np.intp),
    )


def _components(n: int, first: np.ndarray, second: np.ndarray, same: np.ndarray) -> np.ndarray:
    """Connected components over positions, using only edges flagged ``same``."""
    parent = np.arange(n, dtype=np.intp)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in zip(first[same].tolist(), second[same].tolist()):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    return np.asarray([find(i) for i in range(n)], dtype=np.intp)


def _enforce_connectivity(
    sites: np.ndarray, labels: np.ndarray, x: InputTensor, beta: int
) -> np.ndarray:
    """Reassign stray disconnected fragments to the dominant adjacent group.

    Fragments below a quarter of the mean group size always merge; larger
    fragments keep their own label when the group budget allows. Fragments
    with no in-view neighbor stay as they are (nothing to merge into).
    """
    first, second = _neighbor_pairs(sites, x)
    if first.size == 0:
        return labels
    same = labels[first] == labels[second]
    comp = _components(sites.size, first, second, same)

    n_groups = int(labels.max()) + 1
    mean_size = sites.size / max(n_groups, 1)
    comp_ids, comp_sizes = np.unique(comp, return_counts=True)
    size_of = dict(zip(comp_ids.tolist(), comp_sizes.tolist()))

    # The largest component of each label is that group's core.
    core_of_label: dict[int, int] = {}
    for cid in comp_ids.tolist():
        lab = int(labels[comp == cid][0])
        best = core_of_label.get(lab)
        if best is None or size_of[cid] > size_of[best] or (
            size_of[cid] == size_of[best] and cid < best
        ):
            core_of_label[lab] = cid

    out = labels.copy()
    next_label = n_groups
    fragments = [cid for cid in comp_ids.tolist() if core_of_label[int(labels[comp == cid][0])] != cid]
    fragments.sort(key=lambda cid: int(sites[comp == cid].min()))
    for cid in fragments:
        members = comp == cid
        # Count adjacency to each neighboring component's current label.
        touch: dict[int, int] = {}
        for i, j in zip(first.tolist(), second.tolist()):
            for a, bpos in ((i, j), (j, i)):
                if members[a] and not members[bpos]:
                    lab = int(out[bpos])
                    touch[lab] = touch.get(lab, 0) + 1
        n_now = len(np.unique(out))
        if touch:
            small = size_of[cid] < 0.25 * mean_size
            if small or n_now >= beta:
                target = max(sorted(touch), key=lambda lab: (touch[lab], -lab))
                out[members] = target
                continue
        # Keep the fragment as its own group.
        out[members] = next_label
        next_label += 1

    out = _compact_labels(out)
    # Budget safety: merge smallest groups into their most-adjacent neighbor.
    while int(out.max()) + 1 > beta:
        ids, counts = np.unique(out, return_counts=True)
        smallest = int(ids[np.argmax(counts == counts.min())])
        members = out == smallest
        touch = {}
        for i, j in zip(first.tolist(), second.tolist()):
            for a, bpos in ((i, j), (j, i)):
                if members[a] and not members[bpos]:
                    lab = int(out[bpos])
                    touch[lab] = touch.get(lab, 0) + 1
        if touch:
            target = max(sorted(touch), key=lambda lab: (touch[lab], -lab))
        else:
            target = int(ids[ids != smallest][0])
        out[members] = target
        out = _compact_labels(out)
    return out
