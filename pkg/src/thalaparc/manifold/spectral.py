"""Spectral initialization of the layout from the fuzzy graph Laplacian.

Coordinates come from the d nontrivial bottom eigenvectors of the symmetric
normalized Laplacian, computed as the top eigenvectors of the normalized
adjacency (better conditioned for iterative solvers). Small graphs take a
dense path. Any solver failure falls back to seeded uniform noise, so
initialization never raises.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

INIT_RADIUS = 10.0
_NOISE_SCALE = 1e-4
_DENSE_CUTOFF = 512


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    flip = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])] < 0
    return vectors * np.where(flip, -1.0, 1.0)


def _normalized_adjacency(graph: sp.spmatrix) -> sp.csr_matrix:
    w = sp.csr_matrix(graph, dtype=float)
    deg = np.asarray(w.sum(axis=1)).reshape(-1)
    inv_sqrt = 1.0 / np.sqrt(np.maximum(deg, 1e-12))
    scale = sp.diags(inv_sqrt)
    return (scale @ w @ scale).tocsr()


def initialize_embedding(graph: sp.spmatrix, d: int, seed: int) -> np.ndarray:
    """Spectral layout scaled to radius 10, with a seeded-noise fallback."""
    n = graph.shape[0]
    rng = np.random.default_rng(seed)
    if n == 1:
        return np.zeros((1, d))
    try:
        m = _normalized_adjacency(graph)
        k = d + 1
        if n <= _DENSE_CUTOFF or k >= n - 1:
            vals, vecs = np.linalg.eigh(m.toarray())
            order = np.argsort(vals)[::-1]
            vecs = vecs[:, order[:k]]
        else:
            v0 = rng.uniform(-1.0, 1.0, n)
            vals, vecs = spla.eigsh(m, k=k, which="LA", v0=v0, maxiter=n * 5, tol=1e-4)
            vecs = vecs[:, np.argsort(vals)[::-1]]
        coords = _canonical_signs(vecs[:, 1 : d + 1]).astype(float)
        if coords.shape[1] < d or not np.all(np.isfinite(coords)):
            raise np.linalg.LinAlgError("spectral basis incomplete")
        max_abs = np.abs(coords).max()
        if max_abs > 0:
            coords = coords * (INIT_RADIUS / max_abs)
        # tiny jitter breaks exact degeneracies before SGD
        coords = coords + rng.normal(scale=_NOISE_SCALE, size=coords.shape)
        return coords
    except (np.linalg.LinAlgError, spla.ArpackError, ValueError):
        return rng.uniform(-INIT_RADIUS, INIT_RADIUS, size=(n, d))
