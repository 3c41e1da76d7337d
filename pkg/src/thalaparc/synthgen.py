"""Synthetic desk-scale datasets with known cluster structure, plus
embedding-quality oracles (trustworthiness, silhouette) used by the
acceptance suite.

Generated subjects are ball-shaped voxel masks; nucleus territories are
Voronoi cells of per-subject jittered template sites, so labels are spatially
coherent and recentered coordinates are informative across subjects. The
informative feature columns (the Base and Multi-TI analogs) are Gaussian
clusters around per-nucleus centroids; the connectivity analogs are
cluster-independent noise on purpose, so an ablation over synthetic data can
demonstrate that the harness detects uninformative groups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .feature_store import (
    BASE_COLUMNS,
    CONN6_COLUMNS,
    CONN98_COLUMNS,
    MULTITI_COLUMNS,
)
from .labels import NUCLEI, format_label_set

_INFORMATIVE = len(BASE_COLUMNS) + len(MULTITI_COLUMNS)


@dataclass(frozen=True)
class SynthSpec:
    n_subjects: int = 25
    voxels_per_subject: int = 200
    n_clusters: int = 13
    separation: float = 8.0
    overlap_fraction: float = 0.05
    unlabeled_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.separation <= 0:
            raise ValueError("separation must be positive")
        for name in ("overlap_fraction", "unlabeled_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.n_clusters > self.voxels_per_subject:
            raise ValueError("infeasible spec: more clusters than voxels per subject")
        if not 1 <= self.n_clusters <= len(NUCLEI):
            raise ValueError(f"n_clusters must be in [1, {len(NUCLEI)}]")
        if self.overlap_fraction > 0 and self.n_clusters < 2:
            raise ValueError("overlap requires at least 2 clusters")
        if self.n_subjects < 1 or self.voxels_per_subject < 1:
            raise ValueError("need at least one subject and one voxel")


def _scaled_centroids(rng: np.random.Generator, n_clusters: int, dim: int, separation: float) -> np.ndarray:
    centroids = rng.standard_normal((n_clusters, dim))
    if n_clusters == 1:
        return centroids
    dists = np.linalg.norm(centroids[:, None, :] - centroids[None, :, :], axis=2)
    mean_dist = dists[np.triu_indices(n_clusters, k=1)].mean()
    return centroids * (separation / mean_dist)


def _ball_mask(side: int, count: int) -> np.ndarray:
    grid = np.stack(np.meshgrid(np.arange(side), np.arange(side), np.arange(side), indexing="ij"), axis=-1)
    grid = grid.reshape(-1, 3)
    center = (side - 1) / 2.0
    d2 = np.sum((grid - center) ** 2, axis=1)
    order = np.lexsort((grid[:, 2], grid[:, 1], grid[:, 0], d2))
    return grid[order[:count]]


def _relax_sites(sites: np.ndarray, voxels: np.ndarray, iterations: int = 10) -> np.ndarray:
    """Lloyd relaxation toward centroidal Voronoi cells, so no territory is tiny."""
    sites = sites.copy()
    for _ in range(iterations):
        d = np.linalg.norm(voxels[:, None, :] - sites[None, :, :], axis=2)
        nearest = np.argmin(d, axis=1)
        for s in range(len(sites)):
            cell = voxels[nearest == s]
            if len(cell):
                sites[s] = cell.mean(axis=0)
    return sites


def generate(spec: SynthSpec) -> pd.DataFrame:
    """Generate a feature table in the store's on-disk format."""
    rng = np.random.default_rng(spec.seed)
    centroids = _scaled_centroids(rng, spec.n_clusters, _INFORMATIVE, spec.separation)

    side = int(np.ceil(spec.voxels_per_subject ** (1.0 / 3.0)))
    while side**3 < spec.voxels_per_subject:
        side += 1
    reference_ball = _ball_mask(side, spec.voxels_per_subject).astype(float)
    template_sites = _relax_sites(
        rng.uniform(0.15, 0.85, size=(spec.n_clusters, 3)) * (side - 1), reference_ball
    )

    subjects: list[str] = []
    coords_all: list[np.ndarray] = []
    primary_all: list[np.ndarray] = []
    second_all: list[np.ndarray] = []
    margin_all: list[np.ndarray] = []
    width = max(2, len(str(spec.n_subjects)))
    for s in range(spec.n_subjects):
        voxels = _ball_mask(side, spec.voxels_per_subject)
        offset = rng.integers(0, 32, size=3)
        sites = template_sites + rng.normal(scale=0.05 * side, size=(spec.n_clusters, 3))
        d = np.linalg.norm(voxels[:, None, :] - sites[None, :, :], axis=2)
        order = np.argsort(d, axis=1, kind="stable")
        primary = order[:, 0]
        second = order[:, 1] if spec.n_clusters > 1 else primary
        rows = np.arange(len(voxels))
        margin = d[rows, second] - d[rows, primary] if spec.n_clusters > 1 else np.zeros(len(voxels))
        subjects.extend([f"S{s + 1:0{width}d}"] * len(voxels))
        coords_all.append(voxels + offset)
        primary_all.append(primary)
        second_all.append(second)
        margin_all.append(margin)

    coords = np.vstack(coords_all)
    primary = np.concatenate(primary_all)
    second = np.concatenate(second_all)
    margin = np.concatenate(margin_all)
    n = len(primary)

    n_unlabeled = int(np.round(spec.unlabeled_fraction * n))
    unlabeled_idx = set(rng.choice(n, size=n_unlabeled, replace=False).tolist()) if n_unlabeled else set()

    n_overlap = int(np.round(spec.overlap_fraction * n))
    overlap_idx: set[int] = set()
    if n_overlap:
        candidates = [i for i in np.lexsort((np.arange(n), margin)) if i not in unlabeled_idx]
        if len(candidates) < n_overlap:
            raise ValueError("infeasible spec: not enough labeled voxels for the overlap budget")
        overlap_idx = set(candidates[:n_overlap])

    label_cells: list[str] = []
    mean_centroid = np.empty((n, _INFORMATIVE))
    for i in range(n):
        if i in unlabeled_idx:
            label_cells.append("")
            mean_centroid[i] = centroids[primary[i]]
        elif i in overlap_idx:
            pair = (NUCLEI[primary[i]], NUCLEI[second[i]])
            label_cells.append(format_label_set(tuple(sorted(pair, key=NUCLEI.index))))
            mean_centroid[i] = (centroids[primary[i]] + centroids[second[i]]) / 2.0
        else:
            label_cells.append(NUCLEI[primary[i]])
            mean_centroid[i] = centroids[primary[i]]

    informative = mean_centroid + rng.standard_normal((n, _INFORMATIVE))
    conn = rng.standard_normal((n, len(CONN6_COLUMNS) + len(CONN98_COLUMNS)))

    data: dict[str, object] = {
        "subject": subjects,
        "i": coords[:, 0],
        "j": coords[:, 1],
        "k": coords[:, 2],
        "labels": label_cells,
    }
    feature_names = list(BASE_COLUMNS) + list(MULTITI_COLUMNS)
    for c, name in enumerate(feature_names):
        data[name] = informative[:, c]
    for c, name in enumerate(list(CONN6_COLUMNS) + list(CONN98_COLUMNS)):
        data[name] = conn[:, c]
    return pd.DataFrame(data)


def write_table(df: pd.DataFrame, path) -> None:
    df.to_csv(path, sep="\t", index=False, lineterminator="\n")


def gaussian_blobs(
    n_points: int,
    dim: int,
    n_clusters: int,
    separation: float,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Plain Gaussian clusters (unit noise) for embedding-quality checks."""
    rng = np.random.default_rng(seed)
    centroids = _scaled_centroids(rng, n_clusters, dim, separation)
    labels = np.arange(n_points) % n_clusters
    X = centroids[labels] + rng.standard_normal((n_points, dim))
    return X, labels


def trustworthiness(X: np.ndarray, Y: np.ndarray, k: int) -> float:
    """Rank-based penalty for latent neighbors that were not ambient neighbors."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = X.shape[0]
    if Y.shape[0] != n:
        raise ValueError("X and Y must have matching row counts")
    if k >= n:
        raise ValueError(f"k={k} must be < point count {n}")
    if 2 * n - 3 * k - 1 <= 0:
        raise ValueError(f"k={k} too large for the trustworthiness normalizer at n={n}")

    dx = _sq_dists(X)
    dy = _sq_dists(Y)
    np.fill_diagonal(dx, np.inf)
    np.fill_diagonal(dy, np.inf)
    ambient_order = np.argsort(dx, axis=1, kind="stable")
    ambient_rank = np.empty((n, n), dtype=np.int64)
    rows = np.arange(n)[:, None]
    ambient_rank[rows, ambient_order] = np.arange(n)[None, :] + 1

    latent_nn = np.argsort(dy, axis=1, kind="stable")[:, :k]
    ranks = ambient_rank[rows, latent_nn]
    penalty = np.maximum(ranks - k, 0).sum()
    return float(1.0 - (2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0))) * penalty)


def silhouette(Y: np.ndarray, labels) -> float:
    """Mean silhouette coefficient with l2 distance; singletons score 0."""
    Y = np.asarray(Y, dtype=float)
    labels = np.asarray(labels)
    if Y.shape[0] != labels.shape[0]:
        raise ValueError("Y and labels must align")
    unique = np.unique(labels)
    if len(unique) < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    d = np.sqrt(_sq_dists(Y))
    scores = np.zeros(Y.shape[0])
    masks = {c: labels == c for c in unique}
    for i in range(Y.shape[0]):
        own = masks[labels[i]].copy()
        own[i] = False
        size = own.sum()
        if size == 0:
            continue
        a = d[i, own].mean()
        b = min(d[i, masks[c]].mean() for c in unique if c != labels[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def _sq_dists(X: np.ndarray) -> np.ndarray:
    sq = np.einsum("ij,ij->i", X, X)
    d = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.maximum(d, 0.0, out=d)
    return d
