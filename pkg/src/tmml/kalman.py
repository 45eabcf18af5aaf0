"""Two-update Kalman filter over a (speed, acceleration) state.

The standard predict/correct cycle gets a second correction whose
observation is the mean/variance aggregate of the correlated cluster, and
the resulting drop in the speed-variance entry P(1,1) is scored as a
percentage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class KalmanState:
    """State estimate: x_hat = [speed, acceleration], P = 2x2 error covariance."""

    x_hat: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        self.x_hat = np.asarray(self.x_hat, dtype=float).reshape(2)
        self.P = np.asarray(self.P, dtype=float).reshape(2, 2)
        if not np.allclose(self.P, self.P.T, atol=1e-9):
            raise ValueError("P must be symmetric")

    def p11(self) -> float:
        return float(self.P[0, 0])


def default_transition(dt: float = 1.0) -> np.ndarray:
    return np.array([[1.0, dt], [0.0, 1.0]])


def default_process_noise() -> np.ndarray:
    # speed variance 0.04 in the prediction step, acceleration variance 1
    return np.array([[0.04, 0.0], [0.0, 1.0]])


@dataclass
class KfParams:
    """Model matrices; defaults follow the constant-velocity speed model."""

    A: np.ndarray = field(default_factory=default_transition)
    B: np.ndarray = field(default_factory=lambda: np.zeros(2))
    Q: np.ndarray = field(default_factory=default_process_noise)
    H: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))
    R: float = 1.0
    R_plus: float | None = None  # None: use the cluster observation's variance

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float).reshape(2, 2)
        self.B = np.asarray(self.B, dtype=float).reshape(2)
        self.Q = np.asarray(self.Q, dtype=float).reshape(2, 2)
        self.H = np.asarray(self.H, dtype=float).reshape(2)


@dataclass(frozen=True)
class ClusterObservation:
    """Mean and variance of speeds aggregated over correlated cluster members."""

    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("cluster observation variance must be >= 0")


def predict(state: KalmanState, params: KfParams, u: float = 0.0) -> KalmanState:
    """Project the state and error covariance one interval ahead."""
    x = params.A @ state.x_hat + params.B * u
    P = params.A @ state.P @ params.A.T + params.Q
    return KalmanState(x, 0.5 * (P + P.T))


def gain(P_minus: np.ndarray, H: np.ndarray, R: float) -> np.ndarray:
    """Kalman gain for a scalar measurement: P H^T / (H P H^T + R)."""
    P_minus = np.asarray(P_minus, dtype=float)
    H = np.asarray(H, dtype=float).reshape(2)
    s = float(H @ P_minus @ H + R)
    if s <= 0:
        raise ValueError("innovation covariance must be > 0")
    return (P_minus @ H) / s


def _scalar_update(state: KalmanState, z: float, H: np.ndarray, R: float) -> KalmanState:
    K = gain(state.P, H, R)
    innovation = z - float(H @ state.x_hat)
    x = state.x_hat + K * innovation
    P = (np.eye(2) - np.outer(K, H)) @ state.P
    return KalmanState(x, 0.5 * (P + P.T))


def update(prior: KalmanState, z: float, params: KfParams) -> KalmanState:
    """First correction step against the measurement ``z``."""
    return _scalar_update(prior, z, params.H, params.R)


def tml_update(posterior1: KalmanState, z_plus: ClusterObservation, params: KfParams) -> KalmanState:
    """Second correction against the correlated-cluster aggregate.

    The measurement variance is the cluster sample variance unless
    ``params.R_plus`` overrides it.
    """
    r_plus = z_plus.variance if params.R_plus is None else params.R_plus
    return _scalar_update(posterior1, z_plus.mean, params.H, r_plus)


def delta_p(p11_without: float, p11_with: float) -> float:
    """Percent reduction of P(1,1) attributable to the information gain."""
    if p11_without <= 0:
        raise ValueError("baseline P(1,1) must be > 0")
    return 100.0 * (p11_without - p11_with) / p11_without


@dataclass
class SeriesTrace:
    """Per-interval filter outputs for one link."""

    predictions: np.ndarray  # posterior speed estimate per interval
    p11: np.ndarray  # posterior speed variance per interval
    states: list


def run_series(
    speeds,
    cluster_obs=None,
    params: KfParams | None = None,
    mode: str = "no_tml",
    historical=None,
    initial_state: KalmanState | None = None,
) -> SeriesTrace:
    """Filter one link's interval series.

    ``speeds`` are the day's observations. In ``no_tml`` mode the first
    correction consumes them directly with variance ``params.R``. In ``tml``
    mode the first correction instead consumes ``historical`` (per-interval
    ClusterObservation of historical mean/variance; falls back to the day's
    observations when absent) and a second correction consumes
    ``cluster_obs`` where present. Final posterior per interval is posterior
    1 without the cluster step, posterior 2 with it.
    """
    speeds = np.asarray(speeds, dtype=float)
    if speeds.ndim != 1 or speeds.size == 0:
        raise ValueError("speeds must be a non-empty 1-D series")
    if mode not in ("no_tml", "tml"):
        raise ValueError(f"unknown mode {mode!r}")
    params = params or KfParams()
    n = speeds.size
    if cluster_obs is not None and len(cluster_obs) != n:
        raise ValueError("cluster_obs length must match the series")
    if historical is not None and len(historical) != n:
        raise ValueError("historical length must match the series")

    if initial_state is None:
        if mode == "tml" and historical is not None and historical[0] is not None:
            first = historical[0].mean
        else:
            first = speeds[0]
        state = KalmanState([first, 0.0], np.eye(2))
    else:
        state = initial_state

    predictions = np.empty(n)
    p11 = np.empty(n)
    states = []
    for t in range(n):
        prior = predict(state, params)
        if mode == "no_tml":
            state = update(prior, speeds[t], params)
        else:
            if historical is not None and historical[t] is not None:
                hist = historical[t]
                state = _scalar_update(prior, hist.mean, params.H, hist.variance)
            else:
                state = update(prior, speeds[t], params)
            if cluster_obs is not None and cluster_obs[t] is not None:
                state = tml_update(state, cluster_obs[t], params)
        predictions[t] = state.x_hat[0]
        p11[t] = state.p11()
        states.append(state)
    return SeriesTrace(predictions=predictions, p11=p11, states=states)
