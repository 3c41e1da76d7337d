"""From-scratch UMAP-style manifold embedding.

Submodules: ``graph`` (exact and NN-descent neighbor graphs), ``smooth_knn``
(bandwidth calibration and fuzzy union), ``curve`` (similarity-curve fit),
``spectral`` (layout initialization), ``layout`` (SGD optimization) and
``model`` (training, transform of unseen points, serialization).
"""

from .curve import fit_curve, similarity_curve
from .graph import NeighborGraph, knn_graph_approx, knn_graph_exact, pairwise_knn
from .layout import make_epochs_per_sample, optimize_layout
from .model import (
    EmbeddingModel,
    fit_embedding,
    initial_placement,
    load_model,
    resolve_n_neighbors,
    save_model,
    transform_new,
)
from .smooth_knn import (
    FuzzyGraph,
    SmoothKnnResult,
    build_fuzzy_graph,
    calibrate_rows,
    calibrate_smooth_knn,
    fuzzy_union,
    membership_strengths,
    t_conorm,
)
from .spectral import initialize_embedding

__all__ = [
    "EmbeddingModel",
    "FuzzyGraph",
    "NeighborGraph",
    "SmoothKnnResult",
    "build_fuzzy_graph",
    "calibrate_rows",
    "calibrate_smooth_knn",
    "fit_curve",
    "fit_embedding",
    "fuzzy_union",
    "initial_placement",
    "initialize_embedding",
    "knn_graph_approx",
    "knn_graph_exact",
    "load_model",
    "make_epochs_per_sample",
    "membership_strengths",
    "optimize_layout",
    "pairwise_knn",
    "resolve_n_neighbors",
    "save_model",
    "similarity_curve",
    "t_conorm",
    "transform_new",
]
