import numpy as np
import pytest

from oracles import vote_scan
from thalaparc.labels import CONFLICTED, NUCLEI
from thalaparc.latent_classifier import (
    build_labeled_set,
    classify_points,
    default_k,
    knn_vote,
)


def labeled_line(label_sets, spacing=1.0):
    coords = np.arange(len(label_sets), dtype=float).reshape(-1, 1) * spacing
    return build_labeled_set(coords, label_sets)


class TestDefaultK:
    @pytest.mark.parametrize("d,k", [(2, 100), (3, 75), (4, 50)])
    def test_published_values(self, d, k):
        assert default_k(d) == k

    @pytest.mark.parametrize("d", [1, 5, 7])
    def test_other_dims_require_explicit_k(self, d):
        with pytest.raises(ValueError, match="explicitly"):
            default_k(d)


class TestBuildLabeledSet:
    def test_drops_unlabeled_and_conflicted_only(self):
        coords = np.zeros((4, 2))
        lset = build_labeled_set(coords, [("MD",), (), (CONFLICTED,), ("CL", CONFLICTED)])
        assert lset.n == 2
        assert lset.label_sets == (("MD",), ("CL",))

    def test_conflicted_votable_when_enabled(self):
        coords = np.zeros((2, 2))
        lset = build_labeled_set(coords, [(CONFLICTED,), ("MD",)], include_conflicted=True)
        assert lset.n == 2
        assert CONFLICTED in lset.classes

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            build_labeled_set(np.zeros((1, 2)), [()])


class TestKnnVote:
    def test_unanimous(self):
        lset = labeled_line([("MD",)] * 6)
        result = knn_vote([0.0], lset, k=6)
        assert result.winner == "MD"
        assert result.weights == {"MD": 6.0}
        assert result.k == 6

    def test_even_weight_split(self):
        lset = labeled_line([("MD",), ("CL", "MD")])
        result = knn_vote([0.0], lset, k=2)
        assert result.winner == "MD"
        assert result.weights["MD"] == 1.5
        assert result.weights["CL"] == 0.5

    def test_tie_broken_by_mean_distance(self):
        # two MD points at distances 1 and 3; two VA points at 1.9 and 2.0:
        # equal weight 2 each, VA has the smaller mean distance
        coords = np.array([[1.0], [-3.0], [1.9], [-2.0]])
        lset = build_labeled_set(coords, [("MD",), ("MD",), ("VA",), ("VA",)])
        result = knn_vote([0.0], lset, k=4)
        assert result.weights["MD"] == result.weights["VA"] == 2.0
        assert result.winner == "VA"
        oracle_winner, _w, _m = vote_scan(coords, lset.label_sets, [0.0], 4, lset.classes)
        assert oracle_winner == "VA"

    def test_full_tie_breaks_by_schema_order(self):
        coords = np.array([[1.0], [-1.0]])
        lset = build_labeled_set(coords, [("VA",), ("CL",)])
        result = knn_vote([0.0], lset, k=2)
        assert result.winner == "CL"
        assert NUCLEI.index("CL") < NUCLEI.index("VA")

    def test_weight_conservation(self, rng):
        sets = []
        for _ in range(40):
            m = int(rng.integers(1, 4))
            sets.append(tuple(rng.choice(NUCLEI, size=m, replace=False)))
        coords = rng.normal(size=(40, 3))
        lset = build_labeled_set(coords, sets)
        result = classify_points(lset, rng.normal(size=(25, 3)), k=11)
        totals = result.weights.sum(axis=1)
        assert np.all(np.abs(totals - 11.0) <= 1e-9)


class TestClassifyPoints:
    def test_self_queries_reproduce_own_label(self, rng):
        coords = rng.normal(size=(60, 2)) * 10
        sets = [(NUCLEI[i % 13],) for i in range(60)]
        lset = build_labeled_set(coords, sets)
        result = classify_points(lset, coords, k=1)
        assert all(w == s[0] for w, s in zip(result.winners, sets))

    def test_matches_scan_oracle(self, rng):
        n = 300
        coords = rng.normal(size=(n, 2)) * 5
        sets = []
        for _ in range(n):
            if rng.random() < 0.25:
                pair = rng.choice(13, size=2, replace=False)
                sets.append(tuple(sorted((NUCLEI[pair[0]], NUCLEI[pair[1]]), key=NUCLEI.index)))
            else:
                sets.append((NUCLEI[int(rng.integers(13))],))
        lset = build_labeled_set(coords, sets)
        queries = rng.normal(size=(150, 2)) * 5
        result = classify_points(lset, queries, k=9)
        for q in range(150):
            oracle_winner, oracle_weights, _m = vote_scan(
                coords, lset.label_sets, queries[q], 9, lset.classes
            )
            assert result.winners[q] == oracle_winner
            for c, code in enumerate(lset.classes):
                assert result.weights[q, c] == oracle_weights.get(code, 0.0)

    def test_permutation_invariance(self, rng):
        coords = rng.normal(size=(50, 2))
        sets = [(NUCLEI[i % 5],) for i in range(50)]
        queries = rng.normal(size=(20, 2))
        base = classify_points(build_labeled_set(coords, sets), queries, k=7)
        perm = rng.permutation(50)
        shuffled = classify_points(
            build_labeled_set(coords[perm], [sets[i] for i in perm]), queries, k=7
        )
        assert np.array_equal(base.winners, shuffled.winners)

    def test_uniform_scale_invariance(self, rng):
        coords = rng.normal(size=(50, 3))
        sets = [(NUCLEI[i % 6],) for i in range(50)]
        queries = rng.normal(size=(20, 3))
        base = classify_points(build_labeled_set(coords, sets), queries, k=5)
        for c in (0.001, 7.0, 2048.0):
            scaled = classify_points(build_labeled_set(coords * c, sets), queries * c, k=5)
            assert np.array_equal(base.winners, scaled.winners)

    def test_every_query_gets_exactly_one_label(self, rng):
        coords = rng.normal(size=(30, 2))
        sets = [(NUCLEI[i % 3],) for i in range(30)]
        result = classify_points(build_labeled_set(coords, sets), rng.normal(size=(40, 2)), k=5)
        assert len(result.winners) == 40
        assert all(w in NUCLEI for w in result.winners)

    def test_k_exceeding_set_rejected(self, rng):
        lset = labeled_line([("MD",)] * 4)
        with pytest.raises(ValueError):
            classify_points(lset, np.zeros((1, 1)), k=5)

    def test_top_labels_ordering(self):
        lset = labeled_line([("MD",), ("MD",), ("CL",), ("VA", "CL")])
        result = classify_points(lset, np.array([[0.0]]), k=4)
        top = result.top_labels(0, 3)
        assert top[0][0] == "MD" and top[0][1] == 2.0
        assert top[1][0] == "CL" and top[1][1] == 1.5
        assert top[2][0] == "VA" and top[2][1] == 0.5
