"""Thalamic parcellation from multi-contrast voxel features.

Pipeline: tensor-derived feature columns -> validated feature store -> robust
percentile normalization -> latent embedding (from-scratch UMAP) -> multi-label
k-NN voting -> per-nucleus Dice under subject-level cross-validation.
"""

from . import (
    evaluation,
    feature_store,
    latent_classifier,
    manifold,
    normalizer,
    synthgen,
    tensor_features,
)
from .config import RunConfig, load_config
from .labels import CONFLICTED, NUCLEI, REPORT_COLUMNS

__version__ = "0.1.0"

__all__ = [
    "CONFLICTED",
    "NUCLEI",
    "REPORT_COLUMNS",
    "RunConfig",
    "evaluation",
    "feature_store",
    "latent_classifier",
    "load_config",
    "manifold",
    "normalizer",
    "synthgen",
    "tensor_features",
    "__version__",
]
