"""Multi-label k-nearest-neighbor voting in the latent space.

A neighbor carrying m labels contributes 1/m weight to each of them, so every
neighbor casts exactly one unit of influence and the per-query weights sum to
k. Votes are unweighted by distance; distance enters only to break weight
ties (smaller mean neighbor distance wins, then the fixed schema order).
Contributions accumulate in ascending (distance, index) neighbor order, which
pins the floating-point result bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .labels import CONFLICTED, NUCLEI
from .manifold.graph import pairwise_knn

DEFAULT_K_BY_DIM = {2: 100, 3: 75, 4: 50}


def default_k(d: int) -> int:
    """Latent-dimension-specific default neighbor count for voting."""
    if d not in DEFAULT_K_BY_DIM:
        raise ValueError(
            f"no default k for a {d}-D latent space; pass k explicitly"
        )
    return DEFAULT_K_BY_DIM[d]


@dataclass(frozen=True)
class LabeledLatentSet:
    """Immutable labeled training embedding used as the voting reference."""

    coords: np.ndarray
    label_sets: tuple[tuple[str, ...], ...]
    classes: tuple[str, ...]
    label_weights: np.ndarray
    subjects: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.coords.shape[0]


def build_labeled_set(
    coords: np.ndarray,
    label_sets,
    subjects=None,
    include_conflicted: bool = False,
) -> LabeledLatentSet:
    """Assemble the voting reference, dropping unlabeled points.

    Conflicted marks are stripped (and Conflicted-only points dropped) unless
    ``include_conflicted`` makes Conflicted a votable class of its own.
    """
    coords = np.ascontiguousarray(coords, dtype=float)
    classes = NUCLEI + (CONFLICTED,) if include_conflicted else NUCLEI
    class_index = {c: i for i, c in enumerate(classes)}

    kept_rows: list[int] = []
    kept_sets: list[tuple[str, ...]] = []
    for row, labels in enumerate(label_sets):
        votable = tuple(l for l in labels if l in class_index)
        if votable:
            kept_rows.append(row)
            kept_sets.append(votable)
    if not kept_rows:
        raise ValueError("labeled set is empty")

    weights = np.zeros((len(kept_rows), len(classes)))
    for r, votable in enumerate(kept_sets):
        share = 1.0 / len(votable)
        for l in votable:
            weights[r, class_index[l]] = share

    subj = None
    if subjects is not None:
        subj = np.asarray(subjects, dtype=object)[kept_rows]
    return LabeledLatentSet(
        coords=coords[kept_rows],
        label_sets=tuple(kept_sets),
        classes=classes,
        label_weights=weights,
        subjects=subj,
    )


@numba.njit(cache=True)
def _accumulate_votes(idx, dists, label_weights):
    m, k = idx.shape
    n_classes = label_weights.shape[1]
    weights = np.zeros((m, n_classes))
    dist_sums = np.zeros((m, n_classes))
    counts = np.zeros((m, n_classes), dtype=np.int64)
    for q in range(m):
        for t in range(k):
            j = idx[q, t]
            for c in range(n_classes):
                w = label_weights[j, c]
                if w > 0.0:
                    weights[q, c] += w
                    dist_sums[q, c] += dists[q, t]
                    counts[q, c] += 1
    return weights, dist_sums, counts


def _select_winners(weights: np.ndarray, mean_dists: np.ndarray) -> np.ndarray:
    best_w = weights.max(axis=1, keepdims=True)
    at_max = weights == best_w
    masked = np.where(at_max, mean_dists, np.inf)
    best_d = masked.min(axis=1, keepdims=True)
    tied = at_max & (masked == best_d)
    return np.argmax(tied, axis=1)


@dataclass(frozen=True)
class VoteResult:
    winner: str
    weights: dict[str, float]
    k: int
    mean_distances: dict[str, float]


@dataclass(frozen=True)
class ClassificationResult:
    winners: np.ndarray
    weights: np.ndarray
    mean_distances: np.ndarray
    classes: tuple[str, ...]

    def top_labels(self, query: int, n: int = 3) -> list[tuple[str, float]]:
        order = sorted(
            range(len(self.classes)),
            key=lambda c: (-self.weights[query, c], self.mean_distances[query, c], c),
        )
        return [
            (self.classes[c], float(self.weights[query, c]))
            for c in order[:n]
            if self.weights[query, c] > 0.0
        ]


def classify_points(latent_set: LabeledLatentSet, queries: np.ndarray, k: int) -> ClassificationResult:
    """Vote every query against its k exact nearest labeled points."""
    queries = np.ascontiguousarray(queries, dtype=float)
    if queries.ndim != 2 or queries.shape[1] != latent_set.coords.shape[1]:
        raise ValueError("query dimension does not match the labeled set")
    if latent_set.n == 0:
        raise ValueError("labeled set is empty")
    if k < 1 or k > latent_set.n:
        raise ValueError(f"k={k} must be in [1, {latent_set.n}]")
    dists, idx = pairwise_knn(queries, latent_set.coords, k)
    weights, dist_sums, counts = _accumulate_votes(idx, dists, latent_set.label_weights)
    with np.errstate(invalid="ignore"):
        mean_dists = np.where(counts > 0, dist_sums / np.maximum(counts, 1), np.inf)
    winner_idx = _select_winners(weights, mean_dists)
    winners = np.array([latent_set.classes[c] for c in winner_idx], dtype=object)
    return ClassificationResult(
        winners=winners, weights=weights, mean_distances=mean_dists, classes=latent_set.classes
    )


def knn_vote(query: np.ndarray, latent_set: LabeledLatentSet, k: int) -> VoteResult:
    """Single-query voting with full per-label diagnostics."""
    result = classify_points(latent_set, np.asarray(query, dtype=float).reshape(1, -1), k)
    present = result.weights[0] > 0.0
    return VoteResult(
        winner=str(result.winners[0]),
        weights={c: float(w) for c, w in zip(result.classes, result.weights[0]) if w > 0.0},
        k=k,
        mean_distances={
            c: float(m)
            for c, m, p in zip(result.classes, result.mean_distances[0], present)
            if p
        },
    )
