"""Discrete probability distributions and information measures.

All entropies and divergences are reported in bits (base-2 logs) so that
values coming from different call sites stay on one scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Constructed distributions must sum to 1 within this tolerance.
SUM_TOL = 1e-9
# Inputs off by at most this much are silently renormalized; worse is rejected.
RENORM_TOL = 1e-6


class SupportMismatchError(ValueError):
    """Raised when a divergence's second argument vanishes on the first's support."""


def _as_prob_vector(probs, name: str) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ValueError(f"{name} must be a non-empty 1-D sequence")
    if np.any(p < -SUM_TOL) or np.any(p > 1 + RENORM_TOL):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if abs(total - 1.0) > RENORM_TOL:
        raise ValueError(f"{name} sums to {total!r}, not 1 within {RENORM_TOL}")
    return p / total


@dataclass(frozen=True)
class CategoricalDistribution:
    """Probability mass over discrete outcome categories.

    ``category_values`` carries the real-valued outcome of each category
    (e.g. travel-time minutes or binned variable values).
    """

    probs: np.ndarray
    category_values: np.ndarray

    def __init__(self, probs, category_values=None):
        p = _as_prob_vector(probs, "probs")
        if category_values is None:
            values = np.arange(p.size, dtype=float)
        else:
            values = np.asarray(category_values, dtype=float)
        if values.shape != p.shape:
            raise ValueError("probs and category_values must have equal length")
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "category_values", values)

    def __len__(self) -> int:
        return self.probs.size

    def mean(self) -> float:
        return float(self.probs @ self.category_values)

    def variance(self) -> float:
        m = self.mean()
        return float(self.probs @ (self.category_values - m) ** 2)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.choice(self.category_values, size=size, p=self.probs)


@dataclass(frozen=True)
class MultimodalMixture:
    """Weighted combination of categorical distributions over one category set."""

    components: tuple

    def __init__(self, components):
        comps = []
        weights = []
        for w, dist in components:
            if not isinstance(dist, CategoricalDistribution):
                dist = CategoricalDistribution(*dist)
            comps.append((float(w), dist))
            weights.append(float(w))
        if not comps:
            raise ValueError("mixture needs at least one component")
        w = _as_prob_vector(weights, "weights")
        values = comps[0][1].category_values
        for _, dist in comps[1:]:
            if not np.array_equal(dist.category_values, values):
                raise ValueError("all components must share one category set")
        comps = tuple((float(wi), dist) for wi, (_, dist) in zip(w, comps))
        object.__setattr__(self, "components", comps)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    def collapse(self) -> CategoricalDistribution:
        """Marginal categorical distribution of the mixture."""
        values = self.components[0][1].category_values
        probs = sum(w * dist.probs for w, dist in self.components)
        return CategoricalDistribution(probs, values)

    def mean(self) -> float:
        return self.collapse().mean()

    def variance(self) -> float:
        return self.collapse().variance()

    def sample(self, rng: np.random.Generator):
        """Draw one outcome: pick a component by weight, then a category."""
        idx = rng.choice(len(self.components), p=self.weights)
        return self.components[idx][1].sample(rng)


@dataclass(frozen=True)
class JointDistribution:
    """Joint probability mass function over (x-category, y-category) pairs."""

    table: np.ndarray

    def __init__(self, table):
        t = np.asarray(table, dtype=float)
        if t.ndim != 2 or t.size < 1:
            raise ValueError("joint table must be 2-D and non-empty")
        if np.any(t < -SUM_TOL):
            raise ValueError("joint table entries must be non-negative")
        t = np.clip(t, 0.0, None)
        total = t.sum()
        if abs(total - 1.0) > RENORM_TOL:
            raise ValueError(f"joint table sums to {total!r}, not 1 within {RENORM_TOL}")
        object.__setattr__(self, "table", t / total)

    def marginal_x(self) -> np.ndarray:
        return self.table.sum(axis=1)

    def marginal_y(self) -> np.ndarray:
        return self.table.sum(axis=0)

    def transpose(self) -> "JointDistribution":
        return JointDistribution(self.table.T)


@dataclass(frozen=True)
class ClusterCategoryTensor:
    """Per-cluster probability tensor indexed by (category k, time stage t)."""

    p: np.ndarray

    def __init__(self, p):
        t = np.asarray(p, dtype=float)
        if t.ndim != 2 or t.size < 1:
            raise ValueError("tensor must be 2-D (categories x stages)")
        if np.any(t < -SUM_TOL):
            raise ValueError("tensor entries must be non-negative")
        t = np.clip(t, 0.0, None)
        total = t.sum()
        if abs(total - 1.0) > RENORM_TOL:
            raise ValueError(f"tensor sums to {total!r}, not 1 within {RENORM_TOL}")
        object.__setattr__(self, "p", t / total)


def _plogp(p: np.ndarray) -> np.ndarray:
    # 0 * log 0 := 0 by continuity
    out = np.zeros_like(p)
    nz = p > 0
    out[nz] = p[nz] * np.log2(p[nz])
    return out


def shannon_entropy(d: CategoricalDistribution) -> float:
    """Entropy of ``d`` in bits; lies in [0, log2(len(d))]."""
    return float(-_plogp(d.probs).sum())


def kl_divergence(p: CategoricalDistribution, q: CategoricalDistribution) -> float:
    """Relative entropy of ``p`` against ``q`` in bits.

    Raises SupportMismatchError where ``q`` is zero on ``p``'s support, so a
    vanishing reference fails loudly instead of returning infinity.
    """
    if len(p) != len(q):
        raise ValueError("distributions must share one category set")
    pp, qq = p.probs, q.probs
    bad = (pp > 0) & (qq == 0)
    if np.any(bad):
        raise SupportMismatchError(
            f"q vanishes on p's support at categories {np.flatnonzero(bad).tolist()}"
        )
    nz = pp > 0
    return float(np.sum(pp[nz] * (np.log2(pp[nz]) - np.log2(qq[nz]))))


def mutual_information(j: JointDistribution) -> float:
    """Mutual information of the joint ``j`` in bits; zero for product-form joints."""
    px = j.marginal_x()
    py = j.marginal_y()
    t = j.table
    outer = np.outer(px, py)
    nz = t > 0
    return float(np.sum(t[nz] * (np.log2(t[nz]) - np.log2(outer[nz]))))


def mutual_information_via_expected_kl(j: JointDistribution) -> float:
    """Mutual information as the y-expectation of KL(p(x|y) || p(x)).

    Must agree with :func:`mutual_information` to within 1e-9; zero-probability
    y columns contribute nothing and are skipped.
    """
    px = j.marginal_x()
    py = j.marginal_y()
    p_x = CategoricalDistribution(px)
    total = 0.0
    for y, wy in enumerate(py):
        if wy <= 0.0:
            continue
        cond = CategoricalDistribution(j.table[:, y] / wy)
        total += wy * kl_divergence(cond, p_x)
    return float(total)


def cluster_entropy(tensor: ClusterCategoryTensor) -> float:
    """Entropy in bits of a cluster's category-by-stage tensor; in [0, log2(K*T)]."""
    return float(-_plogp(tensor.p).sum())
