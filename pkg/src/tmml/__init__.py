"""Cluster-correlated uncertainty toolkit.

Groups cells with similar probability distributions, propagates each
observation's information gain through space, variables, time stages, and
cluster membership, and exploits the gain in a two-update Kalman filter and
a utility-guided RRT* planner with online recourse.
"""

from .distributions import (
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

__all__ = [
    "CategoricalDistribution",
    "ClusterCategoryTensor",
    "JointDistribution",
    "MultimodalMixture",
    "SupportMismatchError",
    "cluster_entropy",
    "kl_divergence",
    "mutual_information",
    "mutual_information_via_expected_kl",
    "shannon_entropy",
]
