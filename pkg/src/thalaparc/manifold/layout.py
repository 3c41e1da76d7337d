"""Stochastic gradient layout of the fuzzy graph into the latent space.

Edges are sampled proportionally to their fuzzy weight (an edge of weight w is
visited on roughly w * epochs epochs). Each visit applies an attractive update
along the gradient of log phi(r) for the fitted similarity curve phi, plus
``negative_sample_rate`` repulsive updates against uniformly drawn vertices.
Per-dimension gradient steps are clipped to +/-4 and the learning rate decays
linearly to zero, so coordinates stay finite.

Negative samples are drawn from a counter-based hash of (edge, epoch, sample),
which makes the sequential mode bit-reproducible and keeps the parallel mode
(benign Hogwild races aside) seed-stable.
"""

from __future__ import annotations

import numba
import numpy as np
import scipy.sparse as sp

from .graph import _hash2

GRADIENT_CLIP = 4.0


def make_epochs_per_sample(weights: np.ndarray, n_epochs: int) -> np.ndarray:
    """Epoch gap between visits of each edge, from weight-proportional budgets."""
    weights = np.asarray(weights, dtype=float)
    result = -1.0 * np.ones(weights.shape[0])
    n_samples = n_epochs * (weights / weights.max())
    result[n_samples > 0] = float(n_epochs) / n_samples[n_samples > 0]
    return result


def _epoch_impl(
    head_embedding,
    tail_embedding,
    head,
    tail,
    epochs_per_sample,
    epoch_of_next_sample,
    epochs_per_negative_sample,
    epoch_of_next_negative_sample,
    a,
    b,
    gamma,
    alpha,
    move_other,
    epoch,
    neg_seed,
    clip,
):
    n_tail = tail_embedding.shape[0]
    dim = head_embedding.shape[1]
    for e in numba.prange(epochs_per_sample.shape[0]):
        if epoch_of_next_sample[e] > epoch:
            continue
        i = head[e]
        j = tail[e]

        d2 = 0.0
        for c in range(dim):
            diff = head_embedding[i, c] - tail_embedding[j, c]
            d2 += diff * diff
        if d2 > 0.0:
            coeff = (-2.0 * a * b * d2 ** (b - 1.0)) / (a * d2**b + 1.0)
        else:
            coeff = 0.0
        for c in range(dim):
            g = coeff * (head_embedding[i, c] - tail_embedding[j, c])
            if g > clip:
                g = clip
            elif g < -clip:
                g = -clip
            head_embedding[i, c] += g * alpha
            if move_other:
                tail_embedding[j, c] -= g * alpha

        epoch_of_next_sample[e] += epochs_per_sample[e]

        n_neg = int((epoch - epoch_of_next_negative_sample[e]) / epochs_per_negative_sample[e])
        for p in range(n_neg):
            q = int(_hash2(neg_seed, e, epoch * 16384 + p) % np.uint64(n_tail))
            if move_other and q == i:
                continue
            d2 = 0.0
            for c in range(dim):
                diff = head_embedding[i, c] - tail_embedding[q, c]
                d2 += diff * diff
            if d2 > 0.0:
                coeff = (2.0 * gamma * b) / ((0.001 + d2) * (a * d2**b + 1.0))
            else:
                coeff = 0.0
            for c in range(dim):
                if coeff > 0.0:
                    g = coeff * (head_embedding[i, c] - tail_embedding[q, c])
                    if g > clip:
                        g = clip
                    elif g < -clip:
                        g = -clip
                else:
                    g = clip
                head_embedding[i, c] += g * alpha

        epoch_of_next_negative_sample[e] += n_neg * epochs_per_negative_sample[e]


_epoch_sequential = numba.njit(cache=True)(_epoch_impl)
_epoch_parallel = numba.njit(parallel=True)(_epoch_impl)


def optimize_layout(
    init: np.ndarray,
    graph: sp.spmatrix,
    epochs: int,
    a: float,
    b: float,
    seed: int = 0,
    deterministic: bool = True,
    negative_sample_rate: int = 5,
    learning_rate: float = 1.0,
    gamma: float = 1.0,
    tail_embedding: np.ndarray | None = None,
) -> np.ndarray:
    """Run the layout SGD and return the optimized head coordinates.

    With ``tail_embedding`` the head points are refined against a fixed
    reference embedding (used when placing unseen points); otherwise both edge
    endpoints move.
    """
    if epochs < 1:
        raise ValueError("epochs must be at least 1")
    coo = sp.coo_matrix(graph)
    if coo.nnz == 0:
        return np.array(init, dtype=float, copy=True)
    head = coo.row.astype(np.int64)
    tail = coo.col.astype(np.int64)
    eps = make_epochs_per_sample(coo.data, epochs)
    # first visits at epoch 0, so every positive-weight edge is updated at
    # least once even on a one-epoch budget
    next_sample = np.zeros_like(eps)
    eps_neg = eps / float(negative_sample_rate)
    next_neg = np.zeros_like(eps)

    head_emb = np.ascontiguousarray(init, dtype=float).copy()
    move_other = tail_embedding is None
    # the kernel only writes the tail when move_other is set, but numba types the
    # write unconditionally, so hand it a private writable copy
    tail_emb = head_emb if move_other else np.array(tail_embedding, dtype=float, copy=True)

    step = _epoch_sequential if deterministic else _epoch_parallel
    neg_seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ np.uint64(0xD1B54A32D192ED03)
    for n in range(epochs):
        alpha = learning_rate * (1.0 - n / float(epochs))
        step(
            head_emb,
            tail_emb,
            head,
            tail,
            eps,
            next_sample,
            eps_neg,
            next_neg,
            float(a),
            float(b),
            float(gamma),
            alpha,
            move_other,
            float(n),
            neg_seed,
            GRADIENT_CLIP,
        )
        if not np.all(np.isfinite(head_emb)):
            bad = int(np.argwhere(~np.isfinite(head_emb))[0][0])
            raise RuntimeError(f"non-finite coordinate for point {bad} at epoch {n}")
    return head_emb
