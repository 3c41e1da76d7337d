import numpy as np
import pytest

from thalaparc import synthgen
from thalaparc.feature_store import FeatureGroupSpec, load_dataset

ALL_GROUPS = ("base", "coord", "multiti", "conn6", "conn98")


@pytest.fixture(scope="session")
def small_table(tmp_path_factory):
    """A well-separated 8-subject synthetic table shared across tests."""
    spec = synthgen.SynthSpec(
        n_subjects=8,
        voxels_per_subject=100,
        separation=9.0,
        overlap_fraction=0.05,
        seed=101,
    )
    path = tmp_path_factory.mktemp("data") / "small.tsv"
    synthgen.write_table(synthgen.generate(spec), path)
    return path


@pytest.fixture(scope="session")
def small_dataset(small_table):
    return load_dataset(small_table, FeatureGroupSpec(ALL_GROUPS))


@pytest.fixture()
def rng():
    return np.random.default_rng(20260810)
