"""Belief fusion and propagation of observation information gain.

A BeliefMap holds per-cell, per-variable, per-stage means and variances over
a grid. Applying an observation fuses the observed entry, discounts variance
of nearby cells inside an influence radius, and discounts variance of every
cell sharing the observed cell's cluster, with a sequential weight that
decays as a cluster accumulates observations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Observation:
    """A sensor reading of one variable at one cell and time stage."""

    cell_id: int
    variable: int
    stage: int
    value: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("observation variance must be >= 0")


@dataclass
class CellBelief:
    """Snapshot of one cell: (variables x stages) means and variances."""

    cell_id: int
    means: np.ndarray
    variances: np.ndarray
    cluster_id: int


@dataclass
class BeliefMap:
    """Grid of cell beliefs plus cluster structure.

    ``means`` and ``variances`` have shape (n_cells, n_vars, n_stages) with
    cells numbered row-wise starting at zero. ``cluster_entropies`` (bits per
    cluster) is optional and only needed when entropy gating is used.
    """

    n_rows: int
    n_cols: int
    variables: list
    n_stages: int
    means: np.ndarray
    variances: np.ndarray
    cluster_ids: np.ndarray
    cluster_obs_counts: dict = field(default_factory=dict)
    cluster_entropies: dict | None = None

    def __post_init__(self):
        n_cells = self.n_rows * self.n_cols
        shape = (n_cells, len(self.variables), self.n_stages)
        self.means = np.asarray(self.means, dtype=float).reshape(shape)
        self.variances = np.asarray(self.variances, dtype=float).reshape(shape)
        if np.any(self.variances < 0):
            raise ValueError("variances must be >= 0")
        self.cluster_ids = np.asarray(self.cluster_ids, dtype=int).reshape(n_cells)

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    def cell_position(self, cell_id: int) -> tuple:
        return divmod(int(cell_id), self.n_cols)

    def cell_at(self, row: int, col: int) -> int:
        return int(row) * self.n_cols + int(col)

    def cell(self, cell_id: int) -> CellBelief:
        if not 0 <= cell_id < self.n_cells:
            raise KeyError(f"unknown cell id {cell_id}")
        return CellBelief(
            cell_id=cell_id,
            means=self.means[cell_id].copy(),
            variances=self.variances[cell_id].copy(),
            cluster_id=int(self.cluster_ids[cell_id]),
        )

    def distances_from(self, cell_id: int) -> np.ndarray:
        """Euclidean distance in cell-index coordinates from one cell to all cells."""
        r0, c0 = self.cell_position(cell_id)
        rows, cols = np.divmod(np.arange(self.n_cells), self.n_cols)
        return np.hypot(rows - r0, cols - c0)

    def total_variance(self) -> float:
        return float(self.variances.sum())

    def feature_matrix(self) -> np.ndarray:
        """Per-cell concatenation of every (variable, stage) mean and variance."""
        n = self.n_cells
        return np.concatenate(
            [self.means.reshape(n, -1), self.variances.reshape(n, -1)], axis=1
        )

    def copy(self) -> "BeliefMap":
        return BeliefMap(
            n_rows=self.n_rows,
            n_cols=self.n_cols,
            variables=list(self.variables),
            n_stages=self.n_stages,
            means=self.means.copy(),
            variances=self.variances.copy(),
            cluster_ids=self.cluster_ids.copy(),
            cluster_obs_counts=dict(self.cluster_obs_counts),
            cluster_entropies=None if self.cluster_entropies is None else dict(self.cluster_entropies),
        )

    def to_json(self, path=None) -> str:
        doc = {
            "n_rows": self.n_rows,
            "n_cols": self.n_cols,
            "variables": list(self.variables),
            "n_stages": self.n_stages,
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "cluster_ids": self.cluster_ids.tolist(),
            "cluster_obs_counts": {str(k): v for k, v in self.cluster_obs_counts.items()},
            "cluster_entropies": None
            if self.cluster_entropies is None
            else {str(k): v for k, v in self.cluster_entropies.items()},
        }
        text = json.dumps(doc, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, source) -> "BeliefMap":
        if isinstance(source, (str, Path)) and Path(str(source)).exists():
            doc = json.loads(Path(source).read_text())
        else:
            doc = json.loads(source)
        return cls(
            n_rows=doc["n_rows"],
            n_cols=doc["n_cols"],
            variables=doc["variables"],
            n_stages=doc["n_stages"],
            means=np.array(doc["means"]),
            variances=np.array(doc["variances"]),
            cluster_ids=np.array(doc["cluster_ids"]),
            cluster_obs_counts={int(k): v for k, v in doc["cluster_obs_counts"].items()},
            cluster_entropies=None
            if doc.get("cluster_entropies") is None
            else {int(k): v for k, v in doc["cluster_entropies"].items()},
        )


def fuse_weight(var_pred: float, var_obs: float) -> float:
    """Fusion weight between prediction and observation: var_pred / (var_pred + var_obs)."""
    if var_pred < 0 or var_obs < 0:
        raise ValueError("variances must be >= 0")
    if var_pred == 0 and var_obs == 0:
        raise ValueError("fusion weight undefined when both variances are zero")
    if math.isinf(var_obs):
        return 0.0
    if math.isinf(var_pred):
        return 1.0
    return var_pred / (var_pred + var_obs)


def best_estimate(mean_pred: float, var_pred: float, obs: Observation) -> tuple:
    """Variance-weighted fusion of a predicted value with one observation.

    Returns (mean, variance); the fused variance never exceeds either input
    variance when both are positive.
    """
    beta = fuse_weight(var_pred, obs.variance)
    mean = (1.0 - beta) * mean_pred + beta * obs.value
    var = (1.0 - beta) * var_pred
    return mean, var


def influence_weight(d: float, radius: float) -> float:
    """Spatial discount for an observation at distance ``d``: max(0, (R^2-d^2)/(R^2+d^2)).

    Equals 1 at the observation point and 0 at or beyond the radius.
    """
    if radius <= 0:
        raise ValueError("influence radius must be > 0")
    if d < 0:
        raise ValueError("distance must be >= 0")
    return max(0.0, (radius**2 - d**2) / (radius**2 + d**2))


def sequential_weight(o_ntype: int) -> float:
    """Weight of the next indirect update after ``o_ntype`` prior cluster observations."""
    if o_ntype < 0:
        raise ValueError("observation count must be >= 0")
    return 1.0 / (1.0 + o_ntype)


def apply_observation(
    belief_map: BeliefMap,
    obs: Observation,
    radius: float,
    *,
    propagate_cluster: bool = True,
    cluster_variables=None,
    cluster_stages=None,
    h_thresh: float | None = None,
    min_samples: int = 3,
) -> BeliefMap:
    """Fold one observation into the map; no variance ever increases.

    Three channels, applied in order:
      (a) the observed entry is fused directly;
      (b) same-variable, same-stage entries of cells within ``radius`` are
          discounted by the spatial influence weight;
      (c) every other cell of the observed cell's cluster is discounted by
          the sequential weight, across ``cluster_variables`` and
          ``cluster_stages`` (defaults: all variables, all stages).

    When ``h_thresh`` is set and the cluster's entropy exceeds it, channel
    (c) stays off until the cluster has accumulated ``min_samples``
    observations (the current one included); low-entropy clusters update
    from the first observation. The cluster's observation count always
    increments. The map is updated in place and returned.
    """
    if not 0 <= obs.cell_id < belief_map.n_cells:
        raise KeyError(f"unknown cell id {obs.cell_id}")
    var_idx = obs.variable if isinstance(obs.variable, int) else belief_map.variables.index(obs.variable)
    if not 0 <= var_idx < len(belief_map.variables):
        raise KeyError(f"unknown variable {obs.variable}")
    if not 0 <= obs.stage < belief_map.n_stages:
        raise KeyError(f"unknown stage {obs.stage}")

    var_pred = belief_map.variances[obs.cell_id, var_idx, obs.stage]
    mean_pred = belief_map.means[obs.cell_id, var_idx, obs.stage]
    beta = fuse_weight(var_pred, obs.variance)

    # (a) direct fusion at the observed entry
    mean, var = best_estimate(mean_pred, var_pred, obs)
    belief_map.means[obs.cell_id, var_idx, obs.stage] = mean
    belief_map.variances[obs.cell_id, var_idx, obs.stage] = var

    # (b) spatial influence on neighbors, same variable and stage
    d = belief_map.distances_from(obs.cell_id)
    near = (d > 0) & (d < radius)
    if np.any(near):
        omega = (radius**2 - d[near] ** 2) / (radius**2 + d[near] ** 2)
        belief_map.variances[near, var_idx, obs.stage] *= 1.0 - beta * omega

    # (c) cluster-correlated discount, observed cell excluded
    cluster = int(belief_map.cluster_ids[obs.cell_id])
    count_before = belief_map.cluster_obs_counts.get(cluster, 0)
    if propagate_cluster:
        gated = False
        if h_thresh is not None and belief_map.cluster_entropies is not None:
            entropy = belief_map.cluster_entropies.get(cluster, 0.0)
            gated = entropy > h_thresh and (count_before + 1) < min_samples
        if not gated:
            w_seq = sequential_weight(count_before)
            members = np.flatnonzero(
                (belief_map.cluster_ids == cluster)
                & (np.arange(belief_map.n_cells) != obs.cell_id)
            )
            v_idx = (
                np.arange(len(belief_map.variables))
                if cluster_variables is None
                else np.asarray(list(cluster_variables), dtype=int)
            )
            s_idx = (
                np.arange(belief_map.n_stages)
                if cluster_stages is None
                else np.asarray(list(cluster_stages), dtype=int)
            )
            if members.size and v_idx.size and s_idx.size:
                belief_map.variances[np.ix_(members, v_idx, s_idx)] *= 1.0 - beta * w_seq
    belief_map.cluster_obs_counts[cluster] = count_before + 1
    return belief_map


def improvement_percent(before: BeliefMap, after: BeliefMap) -> float:
    """Percent reduction in summed variance from ``before`` to ``after``."""
    if before.variances.shape != after.variances.shape:
        raise ValueError("maps must share grid, variables, and stages")
    total_before = before.total_variance()
    if total_before <= 0:
        raise ValueError("total prior variance is zero")
    return 100.0 * (total_before - after.total_variance()) / total_before


def write_improvement_csv(rows, path) -> None:
    """Rows of (scenario, method, improvement_percent) to CSV."""
    import csv

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scenario", "method", "improvement_percent"])
        for scenario, method, pct in rows:
            writer.writerow([scenario, method, f"{pct:.6f}"])
