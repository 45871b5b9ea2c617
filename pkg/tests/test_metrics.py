import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nomad.errors import CycleError, DegenerateTruthError, DimensionError
from nomad.graphs import DagSpec, generate_dag, is_acyclic
from nomad.metrics import evaluate_estimate, nerr, shd, support_confusion

seeds = st.integers(0, 2**32 - 1)


def dags_on(d):
    out = []
    for bits in itertools.product([0, 1], repeat=d * d - d):
        b = np.zeros((d, d))
        b[~np.eye(d, dtype=bool)] = bits
        if is_acyclic(b):
            out.append(b)
    return out


def shd_oracle(a, b):
    """Independent pairwise count: for each unordered pair compare the edge state."""
    d = len(a)
    cost = 0
    for i in range(d):
        for j in range(i + 1, d):
            sa = (a[i, j] != 0, a[j, i] != 0)
            sb = (b[i, j] != 0, b[j, i] != 0)
            cost += sa != sb
    return cost


def edges(d, pairs):
    w = np.zeros((d, d))
    for i, j in pairs:
        w[i, j] = 1.0
    return w


class TestNerr:
    def test_examples(self):
        w0 = generate_dag(DagSpec(d=5, seed=1))
        assert nerr(w0, w0) == 0
        assert nerr(np.zeros_like(w0), w0) == 1
        assert nerr(2 * w0, w0) == pytest.approx(1)

    def test_degenerate(self):
        with pytest.raises(DegenerateTruthError):
            nerr(np.ones((2, 2)), np.zeros((2, 2)))

    def test_shape(self):
        with pytest.raises(DimensionError):
            nerr(np.ones((2, 2)), np.ones((3, 3)))

    @given(seeds, st.integers(2, 8))
    def test_permutation_invariant(self, seed, d):
        rng = np.random.default_rng(seed)
        w0 = generate_dag(DagSpec(d=d, avg_degree=1, seed=seed)) + np.eye(d)
        w = rng.normal(size=(d, d))
        p = rng.permutation(d)
        assert nerr(w[np.ix_(p, p)], w0[np.ix_(p, p)]) == pytest.approx(nerr(w, w0), rel=1e-12)

    @given(seeds, st.integers(2, 8))
    def test_zero_iff_equal(self, seed, d):
        w0 = generate_dag(DagSpec(d=d, avg_degree=1, seed=seed)) + np.eye(d)
        w = w0.copy()
        assert nerr(w, w0) == 0
        w[0, 1] += 1e-3
        assert nerr(w, w0) > 0


class TestShd:
    def test_identical(self):
        w = edges(3, [(0, 1), (1, 2)])
        assert shd(w, 2 * w) == 0

    def test_reversal(self):
        assert shd(edges(2, [(1, 0)]), edges(2, [(0, 1)])) == 1

    def test_disjoint(self):
        assert shd(edges(4, [(1, 2), (2, 3)]), edges(4, [(0, 1)])) == 3

    def test_cycle_raises(self):
        with pytest.raises(CycleError):
            shd(edges(2, [(0, 1), (1, 0)]), np.zeros((2, 2)))

    def test_brute_force_three_nodes(self):
        dags = dags_on(3)
        assert len(dags) == 25
        for a in dags:
            assert shd(a, a) == 0
            for b in dags:
                s = shd(a, b)
                assert s == shd_oracle(a, b) == shd(b, a)
                for c in dags:
                    assert s <= shd(a, c) + shd(c, b)

    @given(seeds, seeds, st.integers(2, 12))
    def test_matches_oracle(self, s1, s2, d):
        a = generate_dag(DagSpec(d=d, avg_degree=min(3, d - 1), seed=s1))
        b = generate_dag(DagSpec(d=d, avg_degree=min(3, d - 1), seed=s2))
        assert shd(a, b) == shd_oracle(a, b)


class TestConfusion:
    def test_perfect(self):
        w = edges(3, [(0, 1), (0, 2)])
        assert support_confusion(w, w) == (1, 0, 1)

    def test_empty_estimate(self):
        truth = generate_dag(DagSpec(d=11, avg_degree=3, seed=0))
        assert support_confusion(np.zeros((11, 11)), truth) == (0, 0, 0)

    def test_seventeen_edge_reference(self):
        # 17 true edges along a fixed order, 7 recovered and nothing else predicted
        pairs = [(i, j) for i in range(11) for j in range(i + 1, 11)][:17]
        truth = edges(11, pairs)
        est = edges(11, pairs[:7])
        tpr, fdr, f1 = support_confusion(est, truth)
        assert tpr == pytest.approx(0.412, abs=5e-4)
        assert fdr == 0
        assert f1 == pytest.approx(0.583, abs=5e-4)

    def test_reversal_is_false_positive(self):
        tpr, fdr, f1 = support_confusion(edges(2, [(1, 0)]), edges(2, [(0, 1)]))
        assert (tpr, fdr, f1) == (0, 1, 0)

    @given(seeds, seeds, st.integers(2, 10))
    def test_f1_consistent(self, s1, s2, d):
        a = generate_dag(DagSpec(d=d, avg_degree=min(3, d - 1), seed=s1))
        b = generate_dag(DagSpec(d=d, avg_degree=min(3, d - 1), seed=s2))
        tpr, fdr, f1 = support_confusion(a, b)
        assert 0 <= tpr <= 1 and 0 <= fdr <= 1
        tp = np.sum((a != 0) & (b != 0))
        fp = np.sum((a != 0) & (b == 0))
        fn = np.sum((a == 0) & (b != 0))
        assert f1 == pytest.approx(2 * tp / (2 * tp + fp + fn) if tp + fp + fn else 0.0)
        if tp > 0:
            precision = 1 - fdr
            assert f1 == pytest.approx(2 * precision * tpr / (precision + tpr))


class TestEvaluate:
    def test_report(self):
        w0 = generate_dag(DagSpec(d=6, avg_degree=2, seed=2))
        rep = evaluate_estimate(w0, w0, w_raw=w0 + 0.1, wall_time=1.5)
        assert rep.shd == 0 and rep.shd_normalized == 0 and rep.f1 == 1
        assert rep.nerr == pytest.approx(nerr(w0 + 0.1, w0))
        assert rep.as_dict()["wall_time"] == 1.5

    def test_empty_truth_gives_nan_nerr(self):
        rep = evaluate_estimate(np.zeros((3, 3)), np.zeros((3, 3)))
        assert np.isnan(rep.nerr) and rep.shd == 0
