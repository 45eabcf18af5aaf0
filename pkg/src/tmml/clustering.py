"""Mixture-model clustering of categorical histograms and feature vectors.

Multinomial mixtures are fit by expectation maximization with k-means++-style
restarts; the component count is chosen by minimizing the Bayesian
information criterion, or by the gap statistic for k-means on 2-D entropy
features. All fits are deterministic for a given seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaln, logsumexp

from .distributions import CategoricalDistribution, shannon_entropy

PROB_FLOOR = 1e-12  # floor under probabilities before taking logs


@dataclass
class MixtureModel:
    """Fitted multinomial mixture: K mixing weights and K component pmfs."""

    K: int
    alpha: np.ndarray
    beta: list
    log_likelihood: float = float("nan")
    log_likelihood_history: list = field(default_factory=list)

    def component_matrix(self) -> np.ndarray:
        return np.stack([b.probs for b in self.beta])


@dataclass
class ClusterAssignment:
    """Hard labels plus the per-item posterior over clusters.

    Labels are the argmax of each responsibility row, ties broken toward the
    lowest cluster index.
    """

    labels: dict
    responsibilities: np.ndarray
    item_ids: list

    def label_array(self) -> np.ndarray:
        return np.array([self.labels[i] for i in self.item_ids])

    def max_responsibility(self, item_id) -> float:
        row = self.item_ids.index(item_id)
        return float(self.responsibilities[row].max())


@dataclass(frozen=True)
class EntropyFeature:
    """(entropy %, expected value) pair used for k-means over cells."""

    item_id: object
    entropy_percent: float
    expected_value: float

    @classmethod
    def from_distribution(cls, item_id, dist: CategoricalDistribution) -> "EntropyFeature":
        n = len(dist)
        h_max = np.log2(n) if n > 1 else 0.0
        pct = 100.0 * shannon_entropy(dist) / h_max if h_max > 0 else 0.0
        return cls(item_id, pct, dist.mean())


def _validate_histograms(data) -> np.ndarray:
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("data must be a non-empty (items x categories) matrix")
    if np.any(x < 0):
        raise ValueError("histogram counts must be non-negative")
    if np.any(x.sum(axis=1) <= 0):
        raise ValueError("every histogram must contain at least one observation")
    return x


def _log_component_matrix(beta: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(beta, PROB_FLOOR))


def _data_log_likelihood(x: np.ndarray, alpha: np.ndarray, beta: np.ndarray) -> float:
    # multinomial coefficient included so the value is the true data likelihood
    coef = gammaln(x.sum(axis=1) + 1) - gammaln(x + 1).sum(axis=1)
    logp = np.log(np.maximum(alpha, PROB_FLOOR)) + x @ _log_component_matrix(beta).T
    return float(np.sum(coef + logsumexp(logp, axis=1)))


def _responsibilities(x: np.ndarray, alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    logp = np.log(np.maximum(alpha, PROB_FLOOR)) + x @ _log_component_matrix(beta).T
    logp -= logsumexp(logp, axis=1, keepdims=True)
    return np.exp(logp)


def _kmeanspp_indices(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: spread initial centers by squared-distance sampling."""
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            chosen.append(int(rng.integers(n)))
        else:
            chosen.append(int(rng.choice(n, p=d2 / total)))
        d2 = np.minimum(d2, np.sum((points - points[chosen[-1]]) ** 2, axis=1))
    return np.array(chosen)


def kmeans(points, k: int, seed: int, n_init: int = 10, max_iter: int = 300, tol: float = 1e-10):
    """Plain Lloyd k-means with k-means++ seeding.

    Written in-house rather than taken from a library so results are
    bit-for-bit reproducible for a given seed. Empty clusters are reseeded
    to the point farthest from its center. Returns (centers, labels, inertia).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be in 1..{n}")
    best = None
    streams = np.random.SeedSequence(seed).spawn(n_init)
    for stream in streams:
        rng = np.random.default_rng(stream)
        centers = pts[_kmeanspp_indices(pts, k, rng)].copy()
        labels = np.zeros(n, dtype=int)
        for _ in range(max_iter):
            d2 = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=2)
            labels = np.argmin(d2, axis=1)
            new_centers = centers.copy()
            for c in range(k):
                members = pts[labels == c]
                if len(members) == 0:
                    far = int(np.argmax(d2[np.arange(n), labels]))
                    new_centers[c] = pts[far]
                else:
                    new_centers[c] = members.mean(axis=0)
            shift = np.max(np.sum((new_centers - centers) ** 2, axis=1))
            centers = new_centers
            if shift <= tol:
                break
        d2 = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(n), labels].sum())
        if best is None or inertia < best[2] - 1e-12:
            best = (centers, labels, inertia)
    return best


def em_fit(data, K: int, seed: int = 0, max_iter: int = 200, tol: float = 1e-8,
           n_restarts: int = 10, category_values=None):
    """Fit a K-component multinomial mixture to categorical histograms.

    The per-iteration log-likelihood is recorded and is non-decreasing; the
    best of ``n_restarts`` seeded restarts is kept. Returns
    (MixtureModel, ClusterAssignment).
    """
    x = _validate_histograms(data)
    n, m = x.shape
    if K < 1:
        raise ValueError("K must be >= 1")
    if K > n:
        raise ValueError(f"K={K} exceeds the number of items ({n})")
    freqs = x / x.sum(axis=1, keepdims=True)
    streams = np.random.SeedSequence(seed).spawn(max(1, n_restarts))
    best = None
    for stream in streams:
        rng = np.random.default_rng(stream)
        seeds_idx = _kmeanspp_indices(freqs, K, rng)
        # smoothed seed histograms keep every component strictly positive
        beta = (x[seeds_idx] + 0.5) / (x[seeds_idx] + 0.5).sum(axis=1, keepdims=True)
        alpha = np.full(K, 1.0 / K)
        history = []
        prev = -np.inf
        for _ in range(max_iter):
            resp = _responsibilities(x, alpha, beta)
            weights = resp.sum(axis=0)
            alpha = weights / n
            beta = resp.T @ x
            beta = np.maximum(beta, PROB_FLOOR)
            beta /= beta.sum(axis=1, keepdims=True)
            ll = _data_log_likelihood(x, alpha, beta)
            history.append(ll)
            if abs(ll - prev) < tol:
                break
            prev = ll
        if best is None or history[-1] > best[3][-1]:
            best = (alpha, beta, _responsibilities(x, alpha, beta), history)
    alpha, beta, resp, history = best
    values = category_values if category_values is not None else np.arange(m, dtype=float)
    model = MixtureModel(
        K=K,
        alpha=alpha,
        beta=[CategoricalDistribution(b, values) for b in beta],
        log_likelihood=history[-1],
        log_likelihood_history=history,
    )
    labels = {i: int(np.argmax(resp[i])) for i in range(n)}
    assignment = ClusterAssignment(labels=labels, responsibilities=resp, item_ids=list(range(n)))
    return model, assignment


def model_log_likelihood(model: MixtureModel, data) -> float:
    """Data log-likelihood under a fitted mixture (multinomial coefficient included)."""
    x = _validate_histograms(data)
    return _data_log_likelihood(x, model.alpha, model.component_matrix())


def bic_score(n_params: int, n_obs: int, log_likelihood: float) -> float:
    """Bayesian information criterion: D*ln(N) - 2*ln(L)."""
    return n_params * np.log(n_obs) - 2.0 * log_likelihood


def bic(model: MixtureModel, data) -> float:
    """BIC of a fitted mixture with D = (K-1) + K*(M-1) free parameters."""
    x = _validate_histograms(data)
    n, m = x.shape
    d = (model.K - 1) + model.K * (m - 1)
    return bic_score(d, n, _data_log_likelihood(x, model.alpha, model.component_matrix()))


def select_k(data, k_range, seed: int = 0, n_restarts: int = 10, **em_kwargs):
    """Pick the component count in ``k_range`` minimizing BIC; ties go to the smallest K.

    Returns (K_best, fitted MixtureModel, ClusterAssignment).
    """
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("k_range must be non-empty")
    best = None
    for k in ks:
        model, assignment = em_fit(data, k, seed=seed, n_restarts=n_restarts, **em_kwargs)
        score = bic(model, data)
        if best is None or score < best[0] - 1e-12:
            best = (score, k, model, assignment)
    return best[1], best[2], best[3]


def _dispersion(pts: np.ndarray, centers: np.ndarray, labels: np.ndarray) -> float:
    return float(np.sum((pts - centers[labels]) ** 2))


def kmeans_gap(features, k_range, seed: int = 0, n_refs: int = 20, n_init: int = 10):
    """Choose the k-means cluster count by the gap statistic.

    ``features`` are EntropyFeature records or an (n, 2) array. The gap for
    each K compares log-dispersion against uniform reference draws over the
    data's bounding box; the K with the largest gap wins (ties to smallest K).
    Returns (K_best, labels array).
    """
    if len(features) and isinstance(features[0], EntropyFeature):
        pts = np.array([[f.entropy_percent, f.expected_value] for f in features])
    else:
        pts = np.asarray(features, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    if n < 2:
        raise ValueError("need at least 2 feature rows")
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("k_range must be non-empty")
    if max(ks) > n:
        raise ValueError(f"k_range exceeds the number of items ({n})")

    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    ref_rng = np.random.default_rng(np.random.SeedSequence([seed, 71]))
    refs = [lo + ref_rng.random(pts.shape) * span for _ in range(n_refs)]

    best_k, best_gap, best_labels = None, -np.inf, None
    for k in ks:
        centers, labels, _ = kmeans(pts, k, seed=seed, n_init=n_init)
        disp = _dispersion(pts, centers, labels)
        if disp <= 0:
            # zero within-cluster scatter: perfect fit, gap is unbounded
            gap = np.inf
        else:
            ref_disps = []
            for i, ref in enumerate(refs):
                c, l, _ = kmeans(ref, k, seed=seed + 1 + i, n_init=n_init)
                ref_disps.append(max(_dispersion(ref, c, l), PROB_FLOOR))
            gap = float(np.mean(np.log(ref_disps)) - np.log(disp))
        if gap > best_gap + 1e-12:
            best_k, best_gap, best_labels = k, gap, labels
    return best_k, best_labels


def assign_temporal_multivariate(beliefs, k=None, k_range=None, seed: int = 0, n_init: int = 10):
    """Cluster cells on their joint (mean, variance) profile across variables and stages.

    Each cell's feature vector concatenates its per-variable, per-stage mean
    and variance; dimensions are z-scored so no variable dominates. Pass a
    fixed ``k`` or a ``k_range`` to be resolved by the gap statistic.
    Returns a ClusterAssignment over cell ids.
    """
    feats = beliefs.feature_matrix()
    if np.any(~np.isfinite(feats)):
        raise ValueError("belief map has missing variable/stage values")
    mu = feats.mean(axis=0)
    sd = feats.std(axis=0)
    sd[sd == 0] = 1.0
    z = (feats - mu) / sd
    if k is None:
        if k_range is None:
            raise ValueError("provide k or k_range")
        k, labels = kmeans_gap(z, k_range, seed=seed, n_init=n_init)
    else:
        _, labels, _ = kmeans(z, int(k), seed=seed, n_init=n_init)
    n = z.shape[0]
    resp = np.zeros((n, int(max(labels)) + 1))
    resp[np.arange(n), labels] = 1.0
    return ClusterAssignment(
        labels={i: int(labels[i]) for i in range(n)},
        responsibilities=resp,
        item_ids=list(range(n)),
    )


def write_assignment_csv(assignment: ClusterAssignment, path) -> None:
    """Emit one row per item: item_id, cluster_id, max_responsibility."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["item_id", "cluster_id", "max_responsibility"])
        for row, item in enumerate(assignment.item_ids):
            writer.writerow(
                [item, assignment.labels[item], f"{assignment.responsibilities[row].max():.6f}"]
            )
