"""Dice scoring, cross-validation, and the feature-group ablation harness.

Per-nucleus Dice treats the (possibly multi-label) manual truth as one voxel
set per nucleus and the single-label predictions as another; evaluation is
restricted to voxels that carry at least one scoreable label. The overall
score is the truth-volume-weighted mean of the thirteen per-nucleus scores,
and fold aggregation reports mean and population standard deviation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import normalizer
from .errors import SchemaError
from .feature_store import Dataset, FeatureGroupSpec, make_folds, select_features
from .labels import NUCLEI, NUCLEUS_INDEX, REPORT_COLUMNS
from .latent_classifier import build_labeled_set, classify_points, default_k
from .manifold import fit_embedding, transform_new

GROUP_DISPLAY = {
    "base": "Base",
    "coord": "Coord",
    "multiti": "Multi-TI",
    "conn6": "Conn6",
    "conn98": "Conn98",
}

# The published ablation rows, in order.
TABLE_1_SUBSETS: tuple[tuple[str, ...], ...] = (
    ("base",),
    ("base", "coord"),
    ("base", "multiti"),
    ("base", "coord", "multiti"),
    ("base", "coord", "multiti", "conn6"),
    ("base", "coord", "multiti", "conn98"),
    ("conn6", "conn98"),
)


def dice(pred: set, truth: set) -> float:
    """2|A n B| / (|A| + |B|); 1 when both empty, 0 when exactly one is."""
    if not pred and not truth:
        return 1.0
    if not pred or not truth:
        return 0.0
    return 2.0 * len(pred & truth) / (len(pred) + len(truth))


def _scoreable(label_sets) -> list[int]:
    return [i for i, ls in enumerate(label_sets) if any(l in NUCLEUS_INDEX for l in ls)]


def per_nucleus_dice(predictions: Sequence[str], truth_sets) -> dict[str, float]:
    """Dice per nucleus over the voxels holding at least one truth label."""
    if len(predictions) != len(truth_sets):
        raise ValueError("predictions and truth must align")
    keep = _scoreable(truth_sets)
    scores: dict[str, float] = {}
    for nucleus in NUCLEI:
        truth_idx = {i for i in keep if nucleus in truth_sets[i]}
        pred_idx = {i for i in keep if predictions[i] == nucleus}
        scores[nucleus] = dice(pred_idx, truth_idx)
    return scores


def truth_volumes(truth_sets) -> dict[str, int]:
    keep = _scoreable(truth_sets)
    return {n: sum(1 for i in keep if n in truth_sets[i]) for n in NUCLEI}


def overall_dice(dice_by_label: dict[str, float], volumes: dict[str, int]) -> float:
    """Volume-weighted mean of the per-nucleus scores."""
    total = float(sum(volumes.values()))
    if total <= 0:
        raise ValueError("all truth volumes are zero")
    return sum(dice_by_label[n] * volumes[n] for n in dice_by_label) / total


@dataclass(frozen=True)
class DiceRow:
    fold: int
    per_label: dict[str, float]
    overall: float


@dataclass(frozen=True)
class AblationRow:
    groups: tuple[str, ...]
    dim: int
    mean: float
    std: float


@dataclass(frozen=True)
class EvaluationReport:
    rows: tuple[DiceRow, ...]
    groups: tuple[str, ...]
    dim: int
    k: int
    folds: int
    seed: int

    @property
    def fold_overalls(self) -> list[float]:
        return [r.overall for r in self.rows]

    @property
    def mean_overall(self) -> float:
        return float(np.mean(self.fold_overalls))

    @property
    def std_overall(self) -> float:
        return float(np.std(self.fold_overalls))


def aggregate_ablation(fold_overalls: Sequence[float], groups) -> AblationRow:
    """Mean and population standard deviation of per-fold overall scores."""
    if len(fold_overalls) < 2:
        raise ValueError("aggregation needs at least 2 folds")
    spec = groups if isinstance(groups, FeatureGroupSpec) else FeatureGroupSpec(tuple(groups))
    values = np.asarray(fold_overalls, dtype=float)
    return AblationRow(
        groups=spec.groups,
        dim=spec.dim,
        mean=float(values.mean()),
        std=float(values.std(ddof=0)),
    )


def _mix64(value: int) -> int:
    z = (value + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return (z ^ (z >> 31)) & 0x7FFFFFFFFFFFFFFF


def fold_seed(seed: int, fold: int) -> int:
    return _mix64(seed * 1024 + fold)


def run_crossval(
    dataset: Dataset,
    config,
    model_sink: Callable | None = None,
) -> EvaluationReport:
    """Per fold: fit scaler on train, embed train, place test, vote, score.

    ``model_sink(fold, model, scaler)`` is invoked after each fold when given,
    so callers can persist artifacts without the harness knowing about paths.
    """
    spec = FeatureGroupSpec(tuple(config.groups))
    plan = make_folds(dataset.subject_ids, config.folds, config.seed)
    matrix = select_features(dataset, spec)
    k_vote = config.k if config.k is not None else default_k(config.dim)

    rows: list[DiceRow] = []
    for fold in range(plan.n_folds):
        train_subjects, test_subjects = plan.train_test(fold)
        assert not set(train_subjects) & set(test_subjects)
        train_mask = dataset.subject_mask(train_subjects)
        test_mask = dataset.subject_mask(test_subjects)

        fit_rows = matrix.values[train_mask] if config.normalize_per_fold else matrix.values
        scaler = normalizer.fit(fit_rows, matrix.directional, matrix.columns)
        x_train = scaler.transform(matrix.values[train_mask])
        x_test = scaler.transform(matrix.values[test_mask])

        model = fit_embedding(
            x_train,
            d=config.dim,
            n_neighbors=config.n_neighbors,
            epochs=config.epochs,
            min_dist=config.min_dist,
            spread=config.spread,
            seed=fold_seed(config.seed, fold),
            deterministic=config.deterministic,
            negative_sample_rate=config.negative_sample_rate,
            learning_rate=config.learning_rate,
            auto_scale_neighbors=config.auto_scale_neighbors,
        )

        train_idx = np.flatnonzero(train_mask)
        test_idx = np.flatnonzero(test_mask)
        train_labels = [dataset.label_sets[i] for i in train_idx]
        labeled = build_labeled_set(
            model.embedding, train_labels, include_conflicted=config.include_conflicted
        )
        if k_vote > labeled.n:
            raise ValueError(
                f"k={k_vote} exceeds the labeled training size {labeled.n} in fold {fold}"
            )

        test_labels = [dataset.label_sets[i] for i in test_idx]
        keep = _scoreable(test_labels)
        latent_test = transform_new(model, x_test[keep], deterministic=config.deterministic)
        result = classify_points(labeled, latent_test, k_vote)

        truth = [test_labels[i] for i in keep]
        per_label = per_nucleus_dice(list(result.winners), truth)
        overall = overall_dice(per_label, truth_volumes(truth))
        rows.append(DiceRow(fold=fold, per_label=per_label, overall=overall))
        if model_sink is not None:
            model_sink(fold, model, scaler)

    return EvaluationReport(
        rows=tuple(rows),
        groups=spec.groups,
        dim=config.dim,
        k=k_vote,
        folds=plan.n_folds,
        seed=config.seed,
    )


def run_ablation(dataset: Dataset, config, subsets=TABLE_1_SUBSETS) -> list[AblationRow]:
    """Cross-validate each feature subset and aggregate its fold overalls."""
    out = []
    for subset in subsets:
        report = run_crossval(dataset, replace(config, groups=tuple(subset)))
        out.append(aggregate_ablation(report.fold_overalls, subset))
    return out


def format_crossval_table(report: EvaluationReport) -> str:
    """Fold-by-nucleus table in the published column order."""
    lines = ["\t".join(["Label", "Overall", *REPORT_COLUMNS])]
    for row in report.rows:
        cells = [f"Fold {row.fold + 1}", f"{row.overall:.2f}"]
        cells.extend(f"{row.per_label[n]:.2f}" for n in REPORT_COLUMNS)
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def format_ablation_table(rows: Sequence[AblationRow]) -> str:
    """Feature-subset ablation table with dimension and mean +/- std columns."""
    group_order = ("base", "coord", "multiti", "conn6", "conn98")
    header = ["Dim."] + [GROUP_DISPLAY[g] for g in group_order] + ["Mean ± Std. Dev."]
    lines = ["\t".join(header)]
    for row in rows:
        marks = ["x" if g in row.groups else "" for g in group_order]
        lines.append("\t".join([str(row.dim), *marks, f"{row.mean:.3f} ± {row.std:.3f}"]))
    return "\n".join(lines) + "\n"


def summary_lines(report: EvaluationReport) -> str:
    """Machine-readable key=value summary at full precision."""
    lines = [
        f"groups={','.join(report.groups)}",
        f"dim={report.dim}",
        f"k={report.k}",
        f"folds={report.folds}",
        f"seed={report.seed}",
    ]
    for row in report.rows:
        lines.append(f"fold{row.fold + 1}.overall={row.overall!r}")
        for n in REPORT_COLUMNS:
            lines.append(f"fold{row.fold + 1}.{n}={row.per_label[n]!r}")
    lines.append(f"mean.overall={report.mean_overall!r}")
    lines.append(f"std.overall={report.std_overall!r}")
    return "\n".join(lines) + "\n"


def check_groups_loadable(dataset: Dataset, subsets) -> None:
    for subset in subsets:
        for g in subset:
            if g not in dataset.features:
                raise SchemaError(f"feature group {g!r} was not loaded")
