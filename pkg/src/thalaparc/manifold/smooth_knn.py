"""Smooth-kNN bandwidth calibration and the fuzzy neighborhood graph.

Each neighbor-distance row is converted to membership strengths
exp(-max(0, d - rho) / sigma): rho is the distance to the nearest distinct
neighbor, and sigma is calibrated by bisection so the total membership mass
equals log2(k). Directed strengths are then symmetrized with the
probabilistic t-conorm a + b - a*b.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np
import scipy.sparse as sp

from .graph import NeighborGraph

SMOOTH_KNN_TOLERANCE = 1e-5
SIGMA_FLOOR_SCALE = 1e-3
MAX_BISECTION_ITER = 64


class SmoothKnnResult(NamedTuple):
    rho: float
    sigma: float
    degenerate: bool


@numba.njit(cache=True)
def _calibrate_rows(distances, target, floor_scale, tol, max_iter):
    n, k = distances.shape
    rho = np.zeros(n)
    sigma = np.zeros(n)
    degenerate = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        r = 0.0
        for j in range(k):
            if distances[i, j] > 0.0:
                r = distances[i, j]
                break
        rho[i] = r

        mean_d = 0.0
        d_max = 0.0
        for j in range(k):
            mean_d += distances[i, j]
            if distances[i, j] > d_max:
                d_max = distances[i, j]
        mean_d /= k
        floor = floor_scale * mean_d

        if d_max <= r:
            # every term saturates at 1 regardless of sigma; take the floor
            sigma[i] = floor
            if abs(k - target) > tol:
                degenerate[i] = 1
            continue

        lo = 0.0
        hi = np.inf
        mid = 1.0
        psum = 0.0
        for _ in range(max_iter):
            psum = 0.0
            for j in range(k):
                shifted = distances[i, j] - r
                if shifted > 0.0:
                    psum += np.exp(-shifted / mid)
                else:
                    psum += 1.0
            if abs(psum - target) <= tol:
                break
            if psum > target:
                hi = mid
                mid = (lo + hi) / 2.0
            else:
                lo = mid
                if hi == np.inf:
                    mid *= 2.0
                else:
                    mid = (lo + hi) / 2.0

        if mid < floor:
            mid = floor
        sigma[i] = mid

        # recheck the residual at the final sigma (flooring may break the solve)
        psum = 0.0
        for j in range(k):
            shifted = distances[i, j] - r
            if shifted > 0.0 and mid > 0.0:
                psum += np.exp(-shifted / mid)
            elif shifted <= 0.0:
                psum += 1.0
        if abs(psum - target) > tol:
            degenerate[i] = 1
    return rho, sigma, degenerate


def calibrate_rows(distances: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Calibrate (rho, sigma) for every row of an ascending distance matrix."""
    distances = np.ascontiguousarray(distances, dtype=float)
    if k < 2:
        raise ValueError("k must be at least 2")
    rho, sigma, degenerate = _calibrate_rows(
        distances, np.log2(k), SIGMA_FLOOR_SCALE, SMOOTH_KNN_TOLERANCE, MAX_BISECTION_ITER
    )
    return rho, sigma, degenerate.astype(bool)


def calibrate_smooth_knn(distances: np.ndarray, k: int) -> SmoothKnnResult:
    """Calibrate one ascending distance row; see module docstring."""
    row = np.asarray(distances, dtype=float).reshape(1, -1)
    if np.any(np.diff(row[0]) < 0):
        raise ValueError("distances must be ascending")
    rho, sigma, degenerate = calibrate_rows(row, k)
    return SmoothKnnResult(float(rho[0]), float(sigma[0]), bool(degenerate[0]))


def membership_strengths(
    indices: np.ndarray,
    distances: np.ndarray,
    rho: np.ndarray,
    sigma: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Directed membership weights as COO triplets (rows, cols, vals)."""
    n, k = indices.shape
    rows = np.repeat(np.arange(n, dtype=np.int64), k)
    cols = indices.reshape(-1).astype(np.int64)
    shifted = distances - rho[:, None]
    safe_sigma = np.where(sigma > 0.0, sigma, 1.0)
    vals = np.where(
        shifted <= 0.0,
        1.0,
        np.where(sigma[:, None] > 0.0, np.exp(-shifted / safe_sigma[:, None]), 0.0),
    ).reshape(-1)
    return rows, cols, vals


def t_conorm(a, b):
    """Probabilistic union a + b - a*b, arranged to be exact at 0 and 1."""
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    return hi + lo * (1.0 - hi)


def fuzzy_union(directed: sp.spmatrix) -> sp.csr_matrix:
    """Symmetrize directed weights with the probabilistic t-conorm."""
    w = sp.csr_matrix(directed)
    wt = w.T.tocsr()
    merged = (w + wt - w.multiply(wt)).tocsr()
    merged.data = np.clip(merged.data, 0.0, 1.0)
    merged.eliminate_zeros()
    return merged


@dataclass(frozen=True)
class FuzzyGraph:
    """Symmetric fuzzy neighborhood graph with its calibration parameters."""

    matrix: sp.csr_matrix
    rho: np.ndarray
    sigma: np.ndarray
    degenerate: np.ndarray

    @property
    def n_points(self) -> int:
        return self.matrix.shape[0]


def build_fuzzy_graph(graph: NeighborGraph, k: int | None = None) -> FuzzyGraph:
    """Calibrate a neighbor graph and return its symmetrized fuzzy graph."""
    if k is None:
        k = graph.n_neighbors
    rho, sigma, degenerate = calibrate_rows(graph.distances, k)
    rows, cols, vals = membership_strengths(graph.indices, graph.distances, rho, sigma)
    n = graph.n_points
    directed = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return FuzzyGraph(matrix=fuzzy_union(directed), rho=rho, sigma=sigma, degenerate=degenerate)
