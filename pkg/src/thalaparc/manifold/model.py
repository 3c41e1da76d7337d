"""Training and serialization of the latent embedding, plus new-point placement.

``fit_embedding`` wires together the pipeline stages: neighbor graph,
smooth-kNN calibration, fuzzy union, similarity-curve fit, spectral
initialization and the SGD layout. The resulting model is immutable and
self-contained: it keeps the training features so unseen points can be placed
by neighbor search, weighted-mean initialization and a short refinement
against the frozen training layout.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .curve import fit_curve
from .graph import knn_graph_approx, knn_graph_exact, pairwise_knn
from .layout import optimize_layout
from .smooth_knn import build_fuzzy_graph, calibrate_rows, membership_strengths
from .spectral import initialize_embedding

_MODEL_MAGIC = "#thalaparc-model"
_MODEL_VERSION = "1"

TRANSFORM_EPOCH_DIVISOR = 10


@dataclass(frozen=True)
class EmbeddingModel:
    embedding: np.ndarray
    train_data: np.ndarray
    rho: np.ndarray
    sigma: np.ndarray
    a: float
    b: float
    d: int
    n_neighbors: int
    epochs: int
    min_dist: float
    spread: float
    negative_sample_rate: int
    learning_rate: float
    seed: int

    @property
    def n_points(self) -> int:
        return self.embedding.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.train_data.shape[1]

    def save(self, path) -> None:
        save_model(self, path)

    @classmethod
    def load(cls, path) -> "EmbeddingModel":
        return load_model(path)


def resolve_n_neighbors(requested: int, n_points: int, auto_scale: bool = True) -> int:
    """Cap the neighbor count for the dataset size.

    The configured default targets folds of tens of thousands of points; on
    desk-scale data it is scaled down proportionally (roughly one fifteenth of
    the point count, floored at 15) and always kept below the point count.
    """
    eff = int(requested)
    if auto_scale:
        eff = min(eff, max(15, n_points // 15))
    return max(2, min(eff, n_points - 1))


def fit_embedding(
    X: np.ndarray,
    d: int = 2,
    n_neighbors: int = 2000,
    epochs: int = 1000,
    min_dist: float = 0.1,
    spread: float = 1.0,
    seed: int = 0,
    deterministic: bool = True,
    negative_sample_rate: int = 5,
    learning_rate: float = 1.0,
    auto_scale_neighbors: bool = True,
    exact_graph: bool = False,
) -> EmbeddingModel:
    """Train a latent embedding of ``X`` (rows are already-normalized voxels)."""
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 3:
        raise ValueError("need at least 3 points to embed")
    if d < 1:
        raise ValueError("latent dimension must be positive")
    k = resolve_n_neighbors(n_neighbors, X.shape[0], auto_scale=auto_scale_neighbors)
    if exact_graph:
        graph = knn_graph_exact(X, k)
    else:
        graph = knn_graph_approx(X, k, seed=seed)
    fuzzy = build_fuzzy_graph(graph)
    a, b = fit_curve(min_dist, spread)
    init = initialize_embedding(fuzzy.matrix, d, seed)
    emb = optimize_layout(
        init,
        fuzzy.matrix,
        epochs,
        a,
        b,
        seed=seed,
        deterministic=deterministic,
        negative_sample_rate=negative_sample_rate,
        learning_rate=learning_rate,
    )
    model = EmbeddingModel(
        embedding=emb,
        train_data=X,
        rho=fuzzy.rho,
        sigma=fuzzy.sigma,
        a=float(a),
        b=float(b),
        d=int(d),
        n_neighbors=int(k),
        epochs=int(epochs),
        min_dist=float(min_dist),
        spread=float(spread),
        negative_sample_rate=int(negative_sample_rate),
        learning_rate=float(learning_rate),
        seed=int(seed),
    )
    for arr in (model.embedding, model.train_data, model.rho, model.sigma):
        arr.flags.writeable = False
    return model


def initial_placement(weights: sp.spmatrix, embedding: np.ndarray) -> np.ndarray:
    """Membership-weighted mean of training coordinates for each new point."""
    weights = sp.csr_matrix(weights)
    mass = np.asarray(weights.sum(axis=1)).reshape(-1)
    mass = np.where(mass > 0, mass, 1.0)
    return (weights @ embedding) / mass[:, None]


def transform_new(model: EmbeddingModel, points: np.ndarray, deterministic: bool = True) -> np.ndarray:
    """Place unseen points into the trained latent space.

    Each point starts at the membership-weighted mean of its nearest training
    points' latent coordinates and is refined for a tenth of the training
    epoch budget while the training layout stays fixed.
    """
    points = np.ascontiguousarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != model.ambient_dim:
        raise ValueError(
            f"expected points with {model.ambient_dim} features, got {points.shape}"
        )
    k = min(model.n_neighbors, model.n_points)
    dists, idx = pairwise_knn(points, model.train_data, k)
    rho, sigma, _ = calibrate_rows(dists, max(2, k))
    rows, cols, vals = membership_strengths(idx, dists, rho, sigma)

    m = points.shape[0]
    weights = sp.coo_matrix((vals, (rows, cols)), shape=(m, model.n_points)).tocsr()
    init = initial_placement(weights, model.embedding)

    refine_epochs = max(1, model.epochs // TRANSFORM_EPOCH_DIVISOR)
    return optimize_layout(
        init,
        weights,
        refine_epochs,
        model.a,
        model.b,
        seed=model.seed + 0x5EED,
        deterministic=deterministic,
        negative_sample_rate=model.negative_sample_rate,
        # refinement against a frozen layout wants gentler steps than training
        learning_rate=model.learning_rate / 4.0,
        tail_embedding=model.embedding,
    )


def _fmt(value: float) -> str:
    return repr(float(value))


def save_model(model: EmbeddingModel, path) -> None:
    """Serialize to a deterministic TSV artifact (header, coords, calibration, data)."""
    n, d = model.embedding.shape
    lines = [f"{_MODEL_MAGIC}\t{_MODEL_VERSION}"]
    meta = {
        "a": _fmt(model.a),
        "b": _fmt(model.b),
        "d": str(model.d),
        "epochs": str(model.epochs),
        "learning_rate": _fmt(model.learning_rate),
        "min_dist": _fmt(model.min_dist),
        "n_neighbors": str(model.n_neighbors),
        "negative_sample_rate": str(model.negative_sample_rate),
        "seed": str(model.seed),
        "spread": _fmt(model.spread),
    }
    for key in sorted(meta):
        lines.append(f"{key}\t{meta[key]}")
    lines.append(f"#coordinates\t{n}\t{d}")
    for row in model.embedding:
        lines.append("\t".join(_fmt(v) for v in row))
    lines.append(f"#calibration\t{n}")
    for r, s in zip(model.rho, model.sigma):
        lines.append(f"{_fmt(r)}\t{_fmt(s)}")
    lines.append(f"#train-data\t{n}\t{model.train_data.shape[1]}")
    for row in model.train_data:
        lines.append("\t".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> EmbeddingModel:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].split("\t")[0] != _MODEL_MAGIC:
        raise ValueError(f"{path}: not an embedding model artifact")
    meta: dict[str, str] = {}
    pos = 1
    while pos < len(lines) and not lines[pos].startswith("#"):
        key, value = lines[pos].split("\t", 1)
        meta[key] = value
        pos += 1

    def read_block(tag: str, pos: int) -> tuple[np.ndarray, int]:
        header = lines[pos].split("\t")
        if header[0] != tag:
            raise ValueError(f"{path}: expected section {tag}, found {header[0]}")
        n_rows = int(header[1])
        block = np.array(
            [[float(v) for v in lines[pos + 1 + r].split("\t")] for r in range(n_rows)]
        )
        return block, pos + 1 + n_rows

    coords, pos = read_block("#coordinates", pos)
    calib, pos = read_block("#calibration", pos)
    train, pos = read_block("#train-data", pos)
    model = EmbeddingModel(
        embedding=coords,
        train_data=train,
        rho=calib[:, 0].copy(),
        sigma=calib[:, 1].copy(),
        a=float(meta["a"]),
        b=float(meta["b"]),
        d=int(meta["d"]),
        n_neighbors=int(meta["n_neighbors"]),
        epochs=int(meta["epochs"]),
        min_dist=float(meta["min_dist"]),
        spread=float(meta["spread"]),
        negative_sample_rate=int(meta["negative_sample_rate"]),
        learning_rate=float(meta["learning_rate"]),
        seed=int(meta["seed"]),
    )
    for arr in (model.embedding, model.train_data, model.rho, model.sigma):
        arr.flags.writeable = False
    return model


def with_embedding(model: EmbeddingModel, embedding: np.ndarray) -> EmbeddingModel:
    """A copy of the model carrying different latent coordinates (for tests)."""
    return replace(model, embedding=embedding)
