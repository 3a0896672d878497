"""Constant-velocity Kalman filter over (center_x, center_y, aspect, height).

State is the 8-vector (x, y, a, h, vx, vy, va, vh) with dt = 1 frame.
Process and measurement noise scale with box height (weights 1/20 for
positions, 1/160 for velocities), so uncertainty adapts to apparent object
size.  States are immutable values; every operation returns a new state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BoxXYAH


@dataclass(frozen=True)
class KalmanState:
    """Posterior mean (8,) and covariance (8, 8). Treated as immutable."""

    mean: np.ndarray
    covariance: np.ndarray


def _cholesky(a: np.ndarray) -> np.ndarray:
    """Lower-triangular Cholesky factor of a small SPD matrix.

    Hand-rolled because the innovation solve is a fixed 4x4 and needs no
    general-purpose decomposition library.
    """
    n = a.shape[0]
    low = np.zeros_like(a)
    for i in range(n):
        for j in range(i + 1):
            acc = a[i, j] - np.dot(low[i, :j], low[j, :j])
            if i == j:
                if acc <= 0:
                    raise np.linalg.LinAlgError(
                        "innovation covariance is not positive definite"
                    )
                low[i, j] = np.sqrt(acc)
            else:
                low[i, j] = acc / low[j, j]
    return low


def _forward_substitute(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``low @ y = b`` for lower-triangular ``low``. ``b`` may be a matrix."""
    n = low.shape[0]
    y = np.array(b, dtype=float)
    for i in range(n):
        y[i] -= low[i, :i] @ y[:i]
        y[i] /= low[i, i]
    return y


def _cho_solve(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``(low @ low.T) x = b`` given the Cholesky factor ``low``."""
    y = _forward_substitute(low, b)
    n = low.shape[0]
    upper = low.T
    x = y
    for i in range(n - 1, -1, -1):
        x[i] -= upper[i, i + 1:] @ x[i + 1:]
        x[i] /= upper[i, i]
    return x


class KalmanFilter:
    """Constant-velocity filter with height-proportional noise.

    ``measurement_noise`` defaults to the position weight; passing a tiny
    value approximates a noise-free detector (updates snap to measurements).
    """

    def __init__(self, position_noise: float = 1.0 / 20,
                 velocity_noise: float = 1.0 / 160,
                 measurement_noise: float | None = None):
        self._std_pos = position_noise
        self._std_vel = velocity_noise
        self._std_meas = position_noise if measurement_noise is None else measurement_noise
        self._motion = np.eye(8)
        for i in range(4):
            self._motion[i, i + 4] = 1.0  # dt = 1 frame

    def initiate(self, measurement: BoxXYAH) -> KalmanState:
        """New state centred on the measurement with zero velocities."""
        mean = np.zeros(8)
        mean[:4] = measurement.as_array()
        h = measurement.height
        std = np.array([
            2 * self._std_pos * h,
            2 * self._std_pos * h,
            1e-2,
            2 * self._std_pos * h,
            10 * self._std_vel * h,
            10 * self._std_vel * h,
            1e-5,
            10 * self._std_vel * h,
        ])
        return KalmanState(mean=mean, covariance=np.diag(std * std))

    def predict(self, state: KalmanState) -> KalmanState:
        h = state.mean[3]
        std = np.array([
            self._std_pos * h,
            self._std_pos * h,
            1e-2,
            self._std_pos * h,
            self._std_vel * h,
            self._std_vel * h,
            1e-5,
            self._std_vel * h,
        ])
        process_cov = np.diag(std * std)
        mean = self._motion @ state.mean
        cov = self._motion @ state.covariance @ self._motion.T + process_cov
        return KalmanState(mean=mean, covariance=cov)

    def project(self, state: KalmanState) -> tuple[np.ndarray, np.ndarray]:
        """Predicted measurement distribution (mean (4,), covariance (4, 4))."""
        h = state.mean[3]
        std = np.array([
            self._std_meas * h,
            self._std_meas * h,
            1e-1,
            self._std_meas * h,
        ])
        meas_mean = state.mean[:4]
        meas_cov = state.covariance[:4, :4] + np.diag(std * std)
        return meas_mean, meas_cov

    def update(self, state: KalmanState, measurement: BoxXYAH) -> KalmanState:
        """Standard Kalman correction on the 4 observed components."""
        meas_mean, innovation_cov = self.project(state)
        low = _cholesky(innovation_cov)
        # gain K = P H^T S^-1, computed as solve(S, (P H^T)^T)^T
        cross = state.covariance[:, :4]
        gain = _cho_solve(low, cross.T).T
        innovation = measurement.as_array() - meas_mean
        mean = state.mean + gain @ innovation
        cov = state.covariance - gain @ innovation_cov @ gain.T
        cov = (cov + cov.T) / 2.0  # keep symmetric against round-off
        return KalmanState(mean=mean, covariance=cov)

    def gating_distance(self, state: KalmanState, measurements: list[BoxXYAH]) -> np.ndarray:
        """Squared Mahalanobis distance of each measurement under the
        predicted measurement distribution."""
        meas_mean, innovation_cov = self.project(state)
        if not measurements:
            return np.zeros(0)
        low = _cholesky(innovation_cov)
        diffs = np.stack([m.as_array() - meas_mean for m in measurements])
        solved = _forward_substitute(low, diffs.T)
        return np.sum(solved * solved, axis=0)
