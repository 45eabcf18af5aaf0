import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmml.distributions import (
    CategoricalDistribution,
    ClusterCategoryTensor,
    JointDistribution,
    MultimodalMixture,
    SupportMismatchError,
    cluster_entropy,
    kl_divergence,
    mutual_information,
    mutual_information_via_expected_kl,
    shannon_entropy,
)


def entropy_by_hand(probs):
    """Term-by-term base-2 entropy, independent of the library code."""
    return -sum(p * math.log2(p) for p in probs if p > 0)


def mi_by_hand(table):
    """Enumerate every joint term of the mutual-information sum directly."""
    table = [list(map(float, row)) for row in table]
    px = [sum(row) for row in table]
    py = [sum(col) for col in zip(*table)]
    total = 0.0
    for i, row in enumerate(table):
        for j, pxy in enumerate(row):
            if pxy > 0:
                total += pxy * math.log2(pxy / (px[i] * py[j]))
    return total


def random_dist(rng, n):
    p = rng.random(n) + 1e-3
    return CategoricalDistribution(p / p.sum())


def random_joint(rng, nx, ny):
    t = rng.random((nx, ny)) + 1e-3
    return JointDistribution(t / t.sum())


class TestConstruction:
    def test_renormalizes_small_error(self):
        d = CategoricalDistribution([0.5, 0.5 + 5e-7])
        assert abs(d.probs.sum() - 1.0) < 1e-9

    def test_rejects_large_error(self):
        with pytest.raises(ValueError):
            CategoricalDistribution([0.5, 0.6])

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            CategoricalDistribution([1.5, -0.5])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            CategoricalDistribution([0.5, 0.5], [1.0, 2.0, 3.0])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            CategoricalDistribution([])

    def test_mixture_weights_sum(self):
        with pytest.raises(ValueError):
            MultimodalMixture([(0.7, CategoricalDistribution([1.0]))])

    def test_mixture_collapse(self):
        a = CategoricalDistribution([1.0, 0.0], [2.0, 30.0])
        b = CategoricalDistribution([0.0, 1.0], [2.0, 30.0])
        mix = MultimodalMixture([(0.25, a), (0.75, b)])
        np.testing.assert_allclose(mix.collapse().probs, [0.25, 0.75])
        assert mix.mean() == pytest.approx(0.25 * 2 + 0.75 * 30)

    def test_mixture_requires_shared_categories(self):
        a = CategoricalDistribution([1.0], [2.0])
        b = CategoricalDistribution([1.0], [5.0])
        with pytest.raises(ValueError):
            MultimodalMixture([(0.5, a), (0.5, b)])

    def test_joint_marginals(self):
        j = JointDistribution([[0.1, 0.2], [0.3, 0.4]])
        np.testing.assert_allclose(j.marginal_x(), [0.3, 0.7])
        np.testing.assert_allclose(j.marginal_y(), [0.4, 0.6])

    def test_tensor_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            ClusterCategoryTensor([[0.5, 0.5], [0.5, 0.5]])


class TestShannonEntropy:
    def test_uniform_four(self):
        assert shannon_entropy(CategoricalDistribution([0.25] * 4)) == pytest.approx(2.0, abs=1e-12)

    def test_degenerate(self):
        assert shannon_entropy(CategoricalDistribution([1.0, 0.0, 0.0])) == 0.0

    def test_two_point_nine_one(self):
        d = CategoricalDistribution([0.9, 0.1])
        expect = entropy_by_hand([0.9, 0.1])
        assert shannon_entropy(d) == pytest.approx(expect, abs=1e-12)
        assert shannon_entropy(d) == pytest.approx(0.4690, abs=1e-4)


class TestKlDivergence:
    def test_identical_zero(self):
        d = CategoricalDistribution([0.3, 0.7])
        assert kl_divergence(d, d) == 0.0

    def test_single_term(self):
        p = CategoricalDistribution([1.0, 0.0])
        q = CategoricalDistribution([0.5, 0.5])
        # one surviving term: 1 * log2(1/0.5) = 1 bit
        assert kl_divergence(p, q) == pytest.approx(1.0, abs=1e-12)

    def test_support_mismatch(self):
        p = CategoricalDistribution([0.5, 0.5])
        q = CategoricalDistribution([1.0, 0.0])
        with pytest.raises(SupportMismatchError):
            kl_divergence(p, q)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            kl_divergence(CategoricalDistribution([1.0]), CategoricalDistribution([0.5, 0.5]))


class TestMutualInformation:
    def test_product_joint_zero(self):
        px = np.array([0.2, 0.8])
        py = np.array([0.4, 0.35, 0.25])
        j = JointDistribution(np.outer(px, py))
        assert mutual_information(j) == pytest.approx(0.0, abs=1e-12)
        assert mutual_information_via_expected_kl(j) == pytest.approx(0.0, abs=1e-12)

    def test_perfectly_correlated_binary(self):
        j = JointDistribution([[0.5, 0.0], [0.0, 0.5]])
        expect = mi_by_hand([[0.5, 0.0], [0.0, 0.5]])
        assert expect == pytest.approx(1.0, abs=1e-12)
        assert mutual_information(j) == pytest.approx(expect, abs=1e-12)
        assert mutual_information_via_expected_kl(j) == pytest.approx(expect, abs=1e-12)

    def test_single_outcome(self):
        assert mutual_information(JointDistribution([[1.0]])) == pytest.approx(0.0, abs=1e-12)

    def test_zero_column_skipped(self):
        j = JointDistribution([[0.5, 0.0], [0.5, 0.0]])
        assert mutual_information_via_expected_kl(j) == pytest.approx(0.0, abs=1e-12)

    def test_random_3x3_agreement(self):
        rng = np.random.default_rng(7)
        j = random_joint(rng, 3, 3)
        a = mutual_information(j)
        b = mutual_information_via_expected_kl(j)
        assert a == pytest.approx(b, abs=1e-9)
        assert a == pytest.approx(mi_by_hand(j.table), abs=1e-9)


class TestClusterEntropy:
    def test_uniform_k2_t1(self):
        assert cluster_entropy(ClusterCategoryTensor([[0.5], [0.5]])) == pytest.approx(1.0, abs=1e-12)

    def test_uniform_k4_t4(self):
        t = ClusterCategoryTensor(np.full((4, 4), 1 / 16))
        assert cluster_entropy(t) == pytest.approx(4.0, abs=1e-12)

    def test_hand_case(self):
        t = ClusterCategoryTensor([[0.7, 0.1], [0.1, 0.1]])
        expect = entropy_by_hand([0.7, 0.1, 0.1, 0.1])
        assert cluster_entropy(t) == pytest.approx(expect, abs=1e-12)
        assert cluster_entropy(t) == pytest.approx(1.3568, abs=1e-4)


@st.composite
def prob_vectors(draw, min_size=1, max_size=8):
    n = draw(st.integers(min_size, max_size))
    raw = draw(
        st.lists(st.floats(1e-6, 1.0, allow_nan=False), min_size=n, max_size=n)
    )
    arr = np.array(raw)
    return arr / arr.sum()


@st.composite
def joint_tables(draw, max_side=5):
    nx = draw(st.integers(1, max_side))
    ny = draw(st.integers(1, max_side))
    raw = draw(
        st.lists(
            st.floats(1e-6, 1.0, allow_nan=False),
            min_size=nx * ny,
            max_size=nx * ny,
        )
    )
    t = np.array(raw).reshape(nx, ny)
    return t / t.sum()


class TestProperties:
    @given(prob_vectors())
    def test_entropy_bounds(self, p):
        h = shannon_entropy(CategoricalDistribution(p))
        assert -1e-9 <= h <= math.log2(len(p)) + 1e-9

    @given(prob_vectors(min_size=2), prob_vectors(min_size=2))
    def test_gibbs_inequality(self, p, q):
        if len(p) != len(q):
            return
        d = kl_divergence(CategoricalDistribution(p), CategoricalDistribution(q))
        assert d >= -1e-12
        if np.allclose(p, q, atol=1e-12):
            assert d < 1e-9

    @given(prob_vectors(min_size=2))
    def test_gibbs_equality_iff(self, p):
        assert kl_divergence(CategoricalDistribution(p), CategoricalDistribution(p)) == 0.0

    @settings(max_examples=50)
    @given(joint_tables())
    def test_mi_formulations_agree(self, t):
        j = JointDistribution(t)
        assert mutual_information(j) == pytest.approx(
            mutual_information_via_expected_kl(j), abs=1e-9
        )

    @settings(max_examples=50)
    @given(joint_tables())
    def test_mi_symmetry(self, t):
        j = JointDistribution(t)
        assert mutual_information(j) == pytest.approx(mutual_information(j.transpose()), abs=1e-9)

    @settings(max_examples=50)
    @given(joint_tables())
    def test_mi_nonnegative(self, t):
        assert mutual_information(JointDistribution(t)) >= -1e-12

    def test_cluster_entropy_permutation_invariant(self):
        rng = np.random.default_rng(11)
        p = rng.random((3, 4))
        p /= p.sum()
        base = cluster_entropy(ClusterCategoryTensor(p))
        for _ in range(5):
            shuffled = p.ravel()[rng.permutation(p.size)].reshape(p.shape)
            assert cluster_entropy(ClusterCategoryTensor(shuffled)) == pytest.approx(base, abs=1e-9)
