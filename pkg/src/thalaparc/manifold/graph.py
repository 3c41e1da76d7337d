"""k-nearest-neighbor graph construction: exact brute force and NN-descent.

The exact builder is the oracle-grade reference; the approximate builder is a
nearest-neighbor-descent refinement (random initialization, local joins over
sampled new/old candidates) that converges to high recall in a handful of
iterations and scales near-linearly in the point count. Both report rows
sorted ascending by (distance, index) so that tie handling is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)


@dataclass(frozen=True)
class NeighborGraph:
    """Per-point neighbor indices and l2 distances, self excluded."""

    indices: np.ndarray
    distances: np.ndarray

    @property
    def n_neighbors(self) -> int:
        return self.indices.shape[1]

    @property
    def n_points(self) -> int:
        return self.indices.shape[0]


@numba.njit(cache=True, inline="always")
def _splitmix64(state):
    z = (state + _GOLDEN) & _U64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)) & _U64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)) & _U64(0xFFFFFFFFFFFFFFFF)
    return z ^ (z >> _U64(31))


@numba.njit(cache=True, inline="always")
def _hash2(seed, a, b):
    return _splitmix64(_splitmix64(seed ^ (_U64(a) * _GOLDEN)) ^ _U64(b))


@numba.njit(cache=True, inline="always")
def _sq_dist(data, p, q):
    acc = 0.0
    for c in range(data.shape[1]):
        diff = data[p, c] - data[q, c]
        acc += diff * diff
    return acc


@numba.njit(cache=True)
def _heap_push(heap_d, heap_i, heap_f, row, d, idx, flag):
    """Replace the worst entry of a max-heap row if ``d`` improves on it."""
    if d >= heap_d[row, 0]:
        return 0
    size = heap_d.shape[1]
    for l in range(size):
        if heap_i[row, l] == idx:
            return 0
    heap_d[row, 0] = d
    heap_i[row, 0] = idx
    heap_f[row, 0] = flag
    pos = 0
    while True:
        left = 2 * pos + 1
        right = left + 1
        largest = pos
        if left < size and heap_d[row, left] > heap_d[row, largest]:
            largest = left
        if right < size and heap_d[row, right] > heap_d[row, largest]:
            largest = right
        if largest == pos:
            break
        heap_d[row, pos], heap_d[row, largest] = heap_d[row, largest], heap_d[row, pos]
        heap_i[row, pos], heap_i[row, largest] = heap_i[row, largest], heap_i[row, pos]
        heap_f[row, pos], heap_f[row, largest] = heap_f[row, largest], heap_f[row, pos]
        pos = largest
    return 1


@numba.njit(cache=True)
def _init_random(data, heap_d, heap_i, heap_f, seed):
    n = data.shape[0]
    k = heap_d.shape[1]
    for i in range(n):
        filled = 0
        attempt = 0
        while filled < k:
            j = int(_hash2(seed, i, attempt) % _U64(n))
            attempt += 1
            if j == i:
                continue
            d = _sq_dist(data, i, j)
            filled += _heap_push(heap_d, heap_i, heap_f, i, d, j, 1)


@numba.njit(cache=True)
def _sample_candidates(heap_i, heap_f, new_cand, old_cand, seed):
    n, k = heap_i.shape
    max_c = new_cand.shape[1]
    new_prio = np.full((n, max_c), _U64(0xFFFFFFFFFFFFFFFF), dtype=_U64)
    old_prio = np.full((n, max_c), _U64(0xFFFFFFFFFFFFFFFF), dtype=_U64)
    for i in range(n):
        for l in range(k):
            j = heap_i[i, l]
            if j < 0:
                continue
            prio = _hash2(seed, i * k + l, j)
            if heap_f[i, l] == 1:
                _reservoir_insert(new_cand, new_prio, i, j, prio)
                _reservoir_insert(new_cand, new_prio, j, i, prio)
            else:
                _reservoir_insert(old_cand, old_prio, i, j, prio)
                _reservoir_insert(old_cand, old_prio, j, i, prio)
    # entries sampled as new from their own row stop being new
    for i in range(n):
        for c in range(max_c):
            j = new_cand[i, c]
            if j < 0:
                continue
            for l in range(k):
                if heap_i[i, l] == j:
                    heap_f[i, l] = 0
                    break


@numba.njit(cache=True, inline="always")
def _reservoir_insert(cand, prio, row, value, p):
    max_c = cand.shape[1]
    for c in range(max_c):
        if cand[row, c] == value:
            return
    worst = 0
    for c in range(1, max_c):
        if prio[row, c] > prio[row, worst]:
            worst = c
    if p < prio[row, worst]:
        cand[row, worst] = value
        prio[row, worst] = p


@numba.njit(cache=True)
def _local_join(data, heap_d, heap_i, heap_f, new_cand, old_cand):
    n = data.shape[0]
    max_c = new_cand.shape[1]
    updates = 0
    for i in range(n):
        for ci in range(max_c):
            p = new_cand[i, ci]
            if p < 0:
                continue
            for cj in range(ci + 1, max_c):
                q = new_cand[i, cj]
                if q < 0 or q == p:
                    continue
                d = _sq_dist(data, p, q)
                updates += _heap_push(heap_d, heap_i, heap_f, p, d, q, 1)
                updates += _heap_push(heap_d, heap_i, heap_f, q, d, p, 1)
            for cj in range(max_c):
                q = old_cand[i, cj]
                if q < 0 or q == p:
                    continue
                d = _sq_dist(data, p, q)
                updates += _heap_push(heap_d, heap_i, heap_f, p, d, q, 1)
                updates += _heap_push(heap_d, heap_i, heap_f, q, d, p, 1)
    return updates


def _chunked_sq_dists(queries: np.ndarray, refs: np.ndarray) -> np.ndarray:
    qq = np.einsum("ij,ij->i", queries, queries)
    rr = np.einsum("ij,ij->i", refs, refs)
    d2 = qq[:, None] + rr[None, :] - 2.0 * queries @ refs.T
    np.maximum(d2, 0.0, out=d2)
    return d2

def pairwise_knn(
    queries: np.ndarray,
    refs: np.ndarray,
    k: int,
    exclude_self: bool = False,
    chunk_rows: int = 512,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest references for each query, ties broken by index.

    With ``exclude_self`` the query block is assumed to be ``refs`` itself and
    the diagonal is suppressed. Returns (distances, indices), rows ascending.
    """
    queries = np.ascontiguousarray(queries, dtype=float)
    refs = np.ascontiguousarray(refs, dtype=float)
    n_refs = refs.shape[0]
    cap = n_refs - 1 if exclude_self else n_refs
    if k > cap:
        raise ValueError(f"k={k} exceeds available reference count {cap}")
    if k < 1:
        raise ValueError("k must be positive")
    out_d = np.empty((queries.shape[0], k))
    out_i = np.empty((queries.shape[0], k), dtype=np.int64)
    for start in range(0, queries.shape[0], chunk_rows):
        stop = min(start + chunk_rows, queries.shape[0])
        d2 = _chunked_sq_dists(queries[start:stop], refs)
        if exclude_self:
            d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        rows = np.arange(stop - start)[:, None]
        part_d = d2[rows, part]
        order = np.lexsort((part, part_d), axis=1)
        idx = part[rows, order]
        out_i[start:stop] = idx
        out_d[start:stop] = np.sqrt(d2[rows, idx])
    return out_d, out_i


def knn_graph_exact(X: np.ndarray, n_neighbors: int) -> NeighborGraph:
    """Brute-force l2 neighbor graph (self excluded)."""
    X = np.ascontiguousarray(X, dtype=float)
    if n_neighbors >= X.shape[0]:
        raise ValueError(f"n_neighbors={n_neighbors} must be < point count {X.shape[0]}")
    dists, idx = pairwise_knn(X, X, n_neighbors, exclude_self=True)
    return NeighborGraph(indices=idx, distances=dists)


def knn_graph_approx(
    X: np.ndarray,
    n_neighbors: int,
    seed: int = 0,
    max_candidates: int = 60,
    n_iters: int = 10,
    delta: float = 0.001,
) -> NeighborGraph:
    """NN-descent approximate neighbor graph; exact fallback for small inputs."""
    X = np.ascontiguousarray(X, dtype=float)
    n = X.shape[0]
    if n_neighbors >= n:
        raise ValueError(f"n_neighbors={n_neighbors} must be < point count {n}")
    if n <= 2 * n_neighbors:
        return knn_graph_exact(X, n_neighbors)

    k = n_neighbors
    heap_d = np.full((n, k), np.inf)
    heap_i = np.full((n, k), -1, dtype=np.int64)
    heap_f = np.zeros((n, k), dtype=np.uint8)
    seed64 = _U64(seed & 0xFFFFFFFFFFFFFFFF)
    _init_random(X, heap_d, heap_i, heap_f, seed64)

    max_c = max(8, min(max_candidates, k))
    for it in range(n_iters):
        new_cand = np.full((n, max_c), -1, dtype=np.int64)
        old_cand = np.full((n, max_c), -1, dtype=np.int64)
        _sample_candidates(heap_i, heap_f, new_cand, old_cand, seed64 + _U64(it + 1))
        updates = _local_join(X, heap_d, heap_i, heap_f, new_cand, old_cand)
        if updates <= delta * n * k:
            break

    dists = np.sqrt(heap_d)
    order = np.lexsort((heap_i, dists), axis=1)
    rows = np.arange(n)[:, None]
    return NeighborGraph(indices=heap_i[rows, order], distances=dists[rows, order])
