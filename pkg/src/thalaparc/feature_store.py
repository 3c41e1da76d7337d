"""Per-voxel dataset model: table ingestion, feature assembly, folds.

The on-disk format is a UTF-8 tab-separated table with a header row. Required
identity columns are ``subject``, ``i``, ``j``, ``k`` and ``labels``
(semicolon-separated nucleus codes, empty allowed). Feature columns use the
reserved names declared in ``GROUP_COLUMNS``. Coordinate features are not
stored: they are recentered voxel indices, derived per subject from the mask
bounding box at load time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataValidationError, SchemaError
from .labels import format_label_set, parse_label_cell

BASE_COLUMNS: tuple[str, ...] = (
    "mprage", "t2w", "fgatir", "t1map_a", "t1map_b",
    "fa", "md", "rd", "ad", "tr",
    "westin_cl", "westin_cp", "westin_cs",
    "knut1", "knut2", "knut3", "knut4", "knut5",
    "knut_edge",
)

COORD_COLUMNS: tuple[str, ...] = ("coord_i", "coord_j", "coord_k")
MULTITI_COLUMNS: tuple[str, ...] = tuple(f"ti_{n:03d}" for n in range(41))
CONN6_COLUMNS: tuple[str, ...] = tuple(f"conn6_{n}" for n in range(6))
CONN98_COLUMNS: tuple[str, ...] = tuple(f"conn98_{n}" for n in range(98))

GROUP_COLUMNS: dict[str, tuple[str, ...]] = {
    "base": BASE_COLUMNS,
    "coord": COORD_COLUMNS,
    "multiti": MULTITI_COLUMNS,
    "conn6": CONN6_COLUMNS,
    "conn98": CONN98_COLUMNS,
}

GROUP_ORDER: tuple[str, ...] = ("base", "coord", "multiti", "conn6", "conn98")

# Orientation components live on a sign-symmetric scale and normalize to [-1, 1].
DIRECTIONAL_COLUMNS: frozenset[str] = frozenset({"knut1", "knut2", "knut3", "knut4", "knut5"})

ID_COLUMNS: tuple[str, ...] = ("subject", "i", "j", "k", "labels")


@dataclass(frozen=True)
class FeatureGroupSpec:
    """An ordered selection of feature groups to concatenate."""

    groups: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.groups:
            raise SchemaError("at least one feature group is required")
        seen = set()
        for g in self.groups:
            if g not in GROUP_COLUMNS:
                raise SchemaError(f"unknown feature group {g!r}")
            if g in seen:
                raise SchemaError(f"duplicate feature group {g!r}")
            seen.add(g)

    @property
    def dim(self) -> int:
        return sum(len(GROUP_COLUMNS[g]) for g in self.groups)

    @property
    def columns(self) -> tuple[str, ...]:
        cols: list[str] = []
        for g in self.groups:
            cols.extend(GROUP_COLUMNS[g])
        return tuple(cols)

    @property
    def directional(self) -> np.ndarray:
        return np.array([c in DIRECTIONAL_COLUMNS for c in self.columns], dtype=bool)

    @property
    def table_columns(self) -> tuple[str, ...]:
        """Feature columns the on-disk table must declare (coord is derived)."""
        cols: list[str] = []
        for g in self.groups:
            if g != "coord":
                cols.extend(GROUP_COLUMNS[g])
        return tuple(cols)


@dataclass(frozen=True)
class VoxelRecord:
    subject: str
    i: int
    j: int
    k: int
    labels: tuple[str, ...]


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    columns: tuple[str, ...]
    directional: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass
class Dataset:
    """Validated voxel records with per-group feature blocks.

    Immutable after construction; all arrays are marked read-only.
    """

    subjects: np.ndarray
    coords: np.ndarray
    label_sets: tuple[tuple[str, ...], ...]
    features: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.subjects = np.asarray(self.subjects, dtype=object)
        self.coords = np.asarray(self.coords, dtype=np.int64)
        self.subjects.flags.writeable = False
        self.coords.flags.writeable = False
        for block in self.features.values():
            block.flags.writeable = False

    @property
    def n(self) -> int:
        return len(self.subjects)

    @property
    def subject_ids(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.subjects.tolist())))

    def subject_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for s in self.subjects.tolist():
            counts[s] = counts.get(s, 0) + 1
        return dict(sorted(counts.items()))

    def record(self, idx: int) -> VoxelRecord:
        i, j, k = (int(v) for v in self.coords[idx])
        return VoxelRecord(str(self.subjects[idx]), i, j, k, self.label_sets[idx])

    def subject_mask(self, subject_ids) -> np.ndarray:
        wanted = set(subject_ids)
        return np.array([s in wanted for s in self.subjects.tolist()], dtype=bool)


def recenter_offsets(coords: np.ndarray) -> np.ndarray:
    """Offsets of voxel indices from the bounding-box midpoint of one subject.

    The midpoint is (min + max) / 2 per axis, so offsets may be half-integers.
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 3 or coords.shape[0] == 0:
        raise ValueError("expected a non-empty (n, 3) coordinate array")
    center = (coords.min(axis=0) + coords.max(axis=0)) / 2.0
    return coords - center


def _recenter_per_subject(subjects: np.ndarray, coords: np.ndarray) -> np.ndarray:
    out = np.empty(coords.shape, dtype=float)
    subj_list = subjects.tolist()
    for s in sorted(set(subj_list)):
        mask = np.array([x == s for x in subj_list], dtype=bool)
        out[mask] = recenter_offsets(coords[mask])
    return out


def load_dataset(path, spec: FeatureGroupSpec) -> Dataset:
    """Load and validate a feature table for the groups in ``spec``."""
    df = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False)
    for col in ID_COLUMNS:
        if col not in df.columns:
            raise SchemaError(f"missing required column {col!r}")
    for col in spec.table_columns:
        if col not in df.columns:
            raise SchemaError(f"missing required column {col!r}")

    subjects = df["subject"].to_numpy(dtype=object)
    try:
        coords = df[["i", "j", "k"]].apply(pd.to_numeric).to_numpy()
    except ValueError as exc:
        raise DataValidationError(f"non-integer voxel index: {exc}") from exc
    if not np.all(np.isfinite(coords)) or not np.all(coords == np.round(coords)):
        raise DataValidationError("voxel indices i, j, k must be integers")
    coords = coords.astype(np.int64)

    label_sets: list[tuple[str, ...]] = []
    for row, cell in enumerate(df["labels"].tolist()):
        try:
            label_sets.append(parse_label_cell(cell))
        except DataValidationError as exc:
            i, j, k = coords[row]
            raise DataValidationError(
                f"{exc} (subject {subjects[row]!r}, voxel ({i}, {j}, {k}))"
            ) from exc

    features: dict[str, np.ndarray] = {}
    for g in spec.groups:
        if g == "coord":
            features[g] = _recenter_per_subject(subjects, coords)
            continue
        cols = list(GROUP_COLUMNS[g])
        try:
            block = df[cols].apply(pd.to_numeric).to_numpy(dtype=float)
        except ValueError as exc:
            raise DataValidationError(f"non-numeric feature value in group {g!r}: {exc}") from exc
        bad = ~np.isfinite(block)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            i, j, k = coords[row]
            raise DataValidationError(
                f"non-finite value in column {cols[col]!r} "
                f"(subject {subjects[row]!r}, voxel ({i}, {j}, {k}))"
            )
        features[g] = block

    return Dataset(subjects=subjects, coords=coords, label_sets=tuple(label_sets), features=features)


def select_features(dataset: Dataset, groups) -> FeatureMatrix:
    """Concatenate the requested group blocks in the given order."""
    if isinstance(groups, FeatureGroupSpec):
        spec = groups
    else:
        spec = FeatureGroupSpec(tuple(groups))
    blocks = []
    for g in spec.groups:
        if g not in dataset.features:
            raise SchemaError(f"feature group {g!r} was not loaded")
        blocks.append(dataset.features[g])
    values = np.hstack(blocks) if len(blocks) > 1 else blocks[0].copy()
    return FeatureMatrix(values=values, columns=spec.columns, directional=spec.directional)


@dataclass(frozen=True)
class FoldPlan:
    n_folds: int
    folds: tuple[tuple[str, ...], ...]
    seed: int

    def train_test(self, fold: int) -> tuple[tuple[str, ...], tuple[str, ...]]:
        test = self.folds[fold]
        train = tuple(s for f_idx, f in enumerate(self.folds) if f_idx != fold for s in f)
        return train, test


def make_folds(subject_ids, n_folds: int, seed: int) -> FoldPlan:
    """Partition subjects into balanced folds, deterministically per seed."""
    ids = sorted(set(subject_ids))
    if n_folds < 2:
        raise ValueError("n_folds must be at least 2")
    if n_folds > len(ids):
        raise ValueError(f"n_folds={n_folds} exceeds subject count {len(ids)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    folds = tuple(tuple(chunk.tolist()) for chunk in np.array_split(np.array(shuffled, dtype=object), n_folds))
    return FoldPlan(n_folds=n_folds, folds=folds, seed=seed)


def write_feature_table(df: pd.DataFrame, path) -> None:
    """Write a feature table with deterministic float formatting."""
    df.to_csv(path, sep="\t", index=False, lineterminator="\n")


def labels_to_cells(label_sets) -> list[str]:
    return [format_label_set(ls) for ls in label_sets]
