"""Attribute-entropy profiles, greedy entropy balancing, and stratified splits.

Scene-level entropy is the Shannon entropy of an attribute's class
distribution within a scene, normalized by log2(8) to [0, 1]. Quadruple-level
entropy sums the scene entropies of A, C and the added set T. The balancer is
a greedy capped-coverage selection over (attribute x entropy-bin) cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attributes import ATTRIBUTE_KINDS, K_CLASSES, AttributeKind, Quadruple, Scene, Source
from .errors import DataIntegrityError, UsageError

_LOG2K = np.log2(K_CLASSES)


def _class_entropy(classes: list[int]) -> float:
    counts = np.bincount(classes, minlength=K_CLASSES).astype(np.float64)
    p = counts[counts > 0] / len(classes)
    return float(-(p * np.log2(p)).sum() / _LOG2K) + 0.0  # avoid -0.0


def _source_classes(sources, kind: AttributeKind) -> list[int]:
    idx = ATTRIBUTE_KINDS.index(kind)
    return [s.class_indices[idx] for s in sources]


def scene_entropy(scene: Scene, kind: AttributeKind) -> float:
    if not scene.sources:
        raise UsageError("scene has no sources")
    return _class_entropy(_source_classes(scene.sources, kind))


def sources_entropy(sources: tuple[Source, ...], kind: AttributeKind) -> float:
    """Entropy of a bare source list (used for the T set of a quadruple)."""
    if not sources:
        raise UsageError("empty source list")
    return _class_entropy(_source_classes(sources, kind))


def scene_profile(scene: Scene) -> np.ndarray:
    """Per-attribute entropies in fixed kind order; aggregate H is the sum."""
    return np.array([scene_entropy(scene, k) for k in ATTRIBUTE_KINDS])


def quad_entropy(quad: Quadruple, scenes: dict[str, Scene], kind: AttributeKind) -> float:
    try:
        a, c = scenes[quad.a_id], scenes[quad.c_id]
    except KeyError as exc:
        raise DataIntegrityError(f"quadruple {quad.id!r}: dangling scene id {exc}") from exc
    return scene_entropy(a, kind) + scene_entropy(c, kind) + sources_entropy(quad.t_sources, kind)


def quad_profile(quad: Quadruple, scenes: dict[str, Scene]) -> np.ndarray:
    return np.array([quad_entropy(quad, scenes, k) for k in ATTRIBUTE_KINDS])


@dataclass(frozen=True)
class BalanceTarget:
    subset_size: int
    bins_per_feature: int = 4
    # None: equal-width bins over each feature's observed [min, max] in the pool
    feature_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.bins_per_feature < 2:
            raise UsageError("need at least 2 bins per feature")


def _bin_features(profiles: np.ndarray, target: BalanceTarget) -> np.ndarray:
    if target.feature_range is None:
        lo, hi = profiles.min(axis=0), profiles.max(axis=0)
    else:
        lo, hi = target.feature_range
    width = np.where(hi - lo > 0, hi - lo, 1.0)
    nb = target.bins_per_feature
    x = (profiles - lo) / width * nb
    return np.clip(np.floor(x).astype(np.int64), 0, nb - 1)


def entrofy_select(profiles: np.ndarray, target: BalanceTarget, seed: int) -> np.ndarray:
    """Greedy capped-coverage subset selection.

    Each candidate occupies one equal-width entropy bin per attribute (edges
    span the pool's observed range per feature). Starting from one
    random item, repeatedly add the candidate with the largest marginal gain
    sum_cells min(count_after, per_cell_target) - min(count_before, ...),
    random uniform tie-break, until subset_size items are chosen.
    Deterministic given (profiles, target, seed).
    """
    profiles = np.asarray(profiles, dtype=np.float64)
    n, n_feat = profiles.shape
    if target.subset_size > n:
        raise UsageError(f"subset_size {target.subset_size} exceeds pool size {n}")
    nb = target.bins_per_feature
    bins = _bin_features(profiles, target)  # (n, n_feat)
    per_cell = target.subset_size / nb
    counts = np.zeros((n_feat, nb), dtype=np.float64)
    rng = np.random.default_rng(seed)
    selected = np.zeros(n, dtype=bool)
    order: list[int] = []
    feat_idx = np.arange(n_feat)

    first = int(rng.integers(n))
    selected[first] = True
    order.append(first)
    counts[feat_idx, bins[first]] += 1.0

    while len(order) < target.subset_size:
        # marginal gain of adding one item to cell c: clip(target - count_c, 0, 1)
        cell_gain = np.clip(per_cell - counts, 0.0, 1.0)  # (n_feat, nb)
        gains = cell_gain[feat_idx[None, :], bins].sum(axis=1)
        gains[selected] = -np.inf
        best = gains.max()
        ties = np.flatnonzero(gains == best)
        pick = int(ties[rng.integers(len(ties))])
        selected[pick] = True
        order.append(pick)
        counts[feat_idx, bins[pick]] += 1.0
    return np.array(order, dtype=np.int64)


def cell_counts(profiles: np.ndarray, target: BalanceTarget, idx: np.ndarray) -> np.ndarray:
    """(n_feat, bins) occupancy of a candidate subset, for balance diagnostics.

    Bin edges come from the full pool, so subsets are binned consistently.
    """
    bins = _bin_features(np.asarray(profiles, dtype=np.float64), target)[idx]
    n_feat = bins.shape[1]
    out = np.zeros((n_feat, target.bins_per_feature), dtype=np.int64)
    for f in range(n_feat):
        out[f] = np.bincount(bins[:, f], minlength=target.bins_per_feature)
    return out


def _largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    quota = weights / weights.sum() * total
    base = np.floor(quota).astype(np.int64)
    short = total - base.sum()
    # hand the leftover units to the largest fractional parts, ties by index
    frac_order = np.argsort(-(quota - base), kind="stable")
    base[frac_order[:short]] += 1
    return base


def make_splits(
    ids: list[str],
    aggregate_h: np.ndarray,
    seed: int,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    h_range: tuple[float, float] = (0.0, 4.0),
    n_bins: int = 4,
) -> dict[str, list[str]]:
    """Stratified 80/10/10 split over aggregate-entropy bins.

    Validation and test sizes are fixed globally (largest-remainder over bins),
    so a 10,000-item input yields exactly 8,000/1,000/1,000.
    """
    n = len(ids)
    if n < 10:
        raise UsageError(f"need at least 10 scenes to split, got {n}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise UsageError("split fractions must sum to 1")
    aggregate_h = np.asarray(aggregate_h, dtype=np.float64)
    lo, hi = h_range
    bins = np.clip(((aggregate_h - lo) / (hi - lo) * n_bins).astype(np.int64), 0, n_bins - 1)
    occupied = [b for b in range(n_bins) if np.any(bins == b)]
    sizes = np.array([(bins == b).sum() for b in occupied], dtype=np.float64)
    n_val = int(round(n * fractions[1]))
    n_test = int(round(n * fractions[2]))
    val_per_bin = _largest_remainder(sizes, n_val)
    test_per_bin = _largest_remainder(sizes, n_test)

    rng = np.random.default_rng(seed)
    splits: dict[str, list[str]] = {"train": [], "val": [], "test": []}
    for j, b in enumerate(occupied):
        members = np.flatnonzero(bins == b)
        members = members[rng.permutation(len(members))]
        nv, nt = int(val_per_bin[j]), int(test_per_bin[j])
        splits["val"].extend(ids[i] for i in members[:nv])
        splits["test"].extend(ids[i] for i in members[nv : nv + nt])
        splits["train"].extend(ids[i] for i in members[nv + nt :])
    for key in splits:
        splits[key].sort()
    return splits
