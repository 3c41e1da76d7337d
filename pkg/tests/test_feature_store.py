import itertools

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thalaparc import feature_store as fs
from thalaparc.errors import DataValidationError, SchemaError

ALL_GROUPS = ("base", "coord", "multiti", "conn6", "conn98")


def tiny_table(tmp_path, n_subjects=2, voxels=100, drop=None, poison=None, bad_label=False):
    rng = np.random.default_rng(5)
    rows = []
    for s in range(n_subjects):
        for v in range(voxels):
            rows.append(
                {
                    "subject": f"sub{s}",
                    "i": v % 5,
                    "j": (v // 5) % 5,
                    "k": v // 25,
                    "labels": "MD" if v % 3 else "MD;CL",
                }
            )
    df = pd.DataFrame(rows)
    for name in fs.BASE_COLUMNS + fs.MULTITI_COLUMNS + fs.CONN6_COLUMNS + fs.CONN98_COLUMNS:
        df[name] = rng.normal(size=len(df))
    if drop:
        df = df.drop(columns=[drop])
    if poison:
        df.loc[poison, "fa"] = np.nan
    if bad_label:
        df.loc[0, "labels"] = "XX"
    path = tmp_path / "table.tsv"
    df.to_csv(path, sep="\t", index=False)
    return path


class TestLoadDataset:
    def test_round_trip(self, tmp_path):
        path = tiny_table(tmp_path)
        ds = fs.load_dataset(path, fs.FeatureGroupSpec(ALL_GROUPS))
        assert ds.n == 200
        assert ds.subject_counts() == {"sub0": 100, "sub1": 100}
        rec = ds.record(0)
        assert rec.subject == "sub0" and rec.labels == ("CL", "MD")

    def test_missing_column_named(self, tmp_path):
        path = tiny_table(tmp_path, drop="fa")
        with pytest.raises(SchemaError, match="'fa'"):
            fs.load_dataset(path, fs.FeatureGroupSpec(("base",)))

    def test_missing_column_ok_if_group_not_selected(self, tmp_path):
        path = tiny_table(tmp_path, drop="fa")
        ds = fs.load_dataset(path, fs.FeatureGroupSpec(("multiti",)))
        assert ds.n == 200

    def test_nan_cites_row(self, tmp_path):
        path = tiny_table(tmp_path, poison=7)
        with pytest.raises(DataValidationError, match=r"sub0.*\(2, 1, 0\)"):
            fs.load_dataset(path, fs.FeatureGroupSpec(("base",)))

    def test_unknown_label_rejected(self, tmp_path):
        path = tiny_table(tmp_path, bad_label=True)
        with pytest.raises(DataValidationError, match="XX"):
            fs.load_dataset(path, fs.FeatureGroupSpec(("base",)))

    def test_dataset_arrays_immutable(self, small_dataset):
        with pytest.raises(ValueError):
            small_dataset.coords[0, 0] = 99


class TestSelectFeatures:
    @pytest.mark.parametrize(
        "groups,dim",
        [
            (("base",), 19),
            (("base", "coord"), 22),
            (("base", "multiti"), 60),
            (("base", "coord", "multiti"), 63),
            (("base", "coord", "multiti", "conn6"), 69),
            (("base", "coord", "multiti", "conn98"), 161),
            (("conn6", "conn98"), 104),
            (("base", "coord", "multiti", "conn6", "conn98"), 167),
        ],
    )
    def test_published_dims(self, small_dataset, groups, dim):
        assert fs.select_features(small_dataset, groups).values.shape[1] == dim

    def test_all_31_subsets(self, small_dataset):
        for r in range(1, len(ALL_GROUPS) + 1):
            for combo in itertools.combinations(ALL_GROUPS, r):
                matrix = fs.select_features(small_dataset, combo)
                expected = sum(len(fs.GROUP_COLUMNS[g]) for g in combo)
                assert matrix.values.shape == (small_dataset.n, expected)
                assert len(matrix.columns) == expected

    def test_column_order_follows_selection(self, small_dataset):
        matrix = fs.select_features(small_dataset, ("multiti", "base"))
        assert matrix.columns[: len(fs.MULTITI_COLUMNS)] == fs.MULTITI_COLUMNS
        assert matrix.columns[len(fs.MULTITI_COLUMNS) :] == fs.BASE_COLUMNS

    def test_directional_flags_only_knutsson(self, small_dataset):
        matrix = fs.select_features(small_dataset, ALL_GROUPS)
        flagged = {c for c, d in zip(matrix.columns, matrix.directional) if d}
        assert flagged == {"knut1", "knut2", "knut3", "knut4", "knut5"}

    def test_unloaded_group_rejected(self, tmp_path):
        path = tiny_table(tmp_path)
        ds = fs.load_dataset(path, fs.FeatureGroupSpec(("base",)))
        with pytest.raises(SchemaError, match="multiti"):
            fs.select_features(ds, ("base", "multiti"))

    def test_unknown_group_rejected(self):
        with pytest.raises(SchemaError):
            fs.FeatureGroupSpec(("base", "wavelet"))

    def test_duplicate_group_rejected(self):
        with pytest.raises(SchemaError):
            fs.FeatureGroupSpec(("base", "base"))


class TestRecenterCoords:
    def test_single_voxel(self):
        assert np.array_equal(fs.recenter_offsets([[4, 7, 9]]), [[0.0, 0.0, 0.0]])

    def test_two_point_midpoint(self):
        out = fs.recenter_offsets([[1, 0, 0], [5, 0, 0]])
        assert out[0, 0] == -2.0 and out[1, 0] == 2.0

    def test_bounding_box_oracle(self, rng):
        coords = rng.integers(0, 50, size=(300, 3))
        out = fs.recenter_offsets(coords)
        for axis in range(3):
            assert abs(out[:, axis].max() + out[:, axis].min()) <= 0.5

    @given(st.integers(-1000, 1000))
    @settings(max_examples=50, deadline=None)
    def test_translation_invariance(self, shift):
        rng = np.random.default_rng(0)
        coords = rng.integers(0, 20, size=(40, 3))
        assert np.array_equal(
            fs.recenter_offsets(coords), fs.recenter_offsets(coords + shift)
        )

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            fs.recenter_offsets(np.empty((0, 3)))


class TestMakeFolds:
    def test_thirty_subjects_five_folds(self):
        plan = fs.make_folds([f"s{i}" for i in range(30)], 5, seed=1)
        assert [len(f) for f in plan.folds] == [6, 6, 6, 6, 6]

    def test_ten_subjects_five_folds(self):
        plan = fs.make_folds([f"s{i}" for i in range(10)], 5, seed=1)
        assert [len(f) for f in plan.folds] == [2, 2, 2, 2, 2]

    def test_balanced_when_uneven(self):
        plan = fs.make_folds([f"s{i}" for i in range(11)], 3, seed=1)
        sizes = sorted(len(f) for f in plan.folds)
        assert sizes == [3, 4, 4]

    def test_deterministic_and_seed_sensitive(self):
        ids = [f"s{i}" for i in range(12)]
        assert fs.make_folds(ids, 4, seed=3) == fs.make_folds(ids, 4, seed=3)
        assert fs.make_folds(ids, 4, seed=3) != fs.make_folds(ids, 4, seed=4)

    @given(st.integers(2, 8), st.integers(0, 100))
    @settings(max_examples=50, deadline=None)
    def test_partition_property(self, n_folds, seed):
        ids = [f"s{i}" for i in range(17)]
        plan = fs.make_folds(ids, n_folds, seed)
        flat = [s for fold in plan.folds for s in fold]
        assert sorted(flat) == sorted(ids)
        assert max(len(f) for f in plan.folds) - min(len(f) for f in plan.folds) <= 1

    def test_train_test_disjoint(self):
        plan = fs.make_folds([f"s{i}" for i in range(10)], 5, seed=0)
        for fold in range(5):
            train, test = plan.train_test(fold)
            assert not set(train) & set(test)
            assert sorted(train + test) == sorted(f"s{i}" for i in range(10))

    def test_too_few_folds_rejected(self):
        with pytest.raises(ValueError):
            fs.make_folds(["a", "b", "c"], 1, seed=0)

    def test_more_folds_than_subjects_rejected(self):
        with pytest.raises(ValueError):
            fs.make_folds(["a", "b"], 3, seed=0)
