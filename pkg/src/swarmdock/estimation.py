"""Fusing per-chaser target pose estimates into one smoothed odometry stream.

Chasers contribute world-frame pose estimates at their own cadence; the
combiner keeps the freshest estimate per chaser, drops anything older than
the staleness window, averages the survivors (arithmetic mean position,
sign-aligned component mean quaternion), and pushes the fused pose through a
moving-average filter with outlier gates. Target velocities come from finite
differences across the filter window, smoothed over the same window length.

The filter holds its last output while starved, so short line-of-sight gaps
do not produce jumps; the odometry's healthy flag tells consumers whether
anyone has seen the target recently.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .dynamics import RigidState
from .quat import (
    IDENTITY_QUAT,
    quat_conjugate,
    quat_error,
    quat_log,
    quat_multiply,
    quat_normalize,
    quat_to_angle,
)
from .vision import PoseEstimate


@dataclass(frozen=True)
class CombinerConfig:
    window: int = 10
    staleness_s: float = 0.5
    position_threshold_m: float = 0.25
    angle_threshold_rad: float = 0.5

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if self.staleness_s <= 0.0:
            raise ValueError("staleness window must be positive")


@dataclass(frozen=True)
class TargetOdometry:
    """Best current belief about the target, with bookkeeping for consumers."""

    state: RigidState
    timestamp: float
    contributors: tuple[int, ...]
    healthy: bool
    initialized: bool


def fuse_estimates(
    positions: np.ndarray, quaternions: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Mean position and sign-aligned mean quaternion of parallel estimates.

    The quaternion mean is the normalized component average after flipping
    every input onto the hemisphere of the first; adequate for estimates that
    agree to within the outlier gates.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    quaternions = np.atleast_2d(np.asarray(quaternions, dtype=float))
    if positions.shape[0] != quaternions.shape[0] or positions.shape[0] == 0:
        raise ValueError("need matching, non-empty position and quaternion stacks")
    mean_p = positions.mean(axis=0)
    ref = quaternions[0]
    aligned = quaternions.copy()
    for i in range(aligned.shape[0]):
        if float(aligned[i] @ ref) < 0.0:
            aligned[i] = -aligned[i]
    return mean_p, quat_normalize(aligned.mean(axis=0))


class PoseFilter:
    """Moving-average pose filter with distance/angle outlier rejection.

    Samples farther than the thresholds from the current window average are
    rejected; more than ``window`` consecutive rejections reset the window so
    a genuine jump (not noise) is eventually followed.
    """

    def __init__(self, cfg: CombinerConfig):
        self.cfg = cfg
        self._samples: deque = deque(maxlen=cfg.window)
        self._rejected_in_a_row = 0

    def _window_average(self) -> tuple[np.ndarray, np.ndarray]:
        ps = np.array([s[1] for s in self._samples])
        qs = np.array([s[2] for s in self._samples])
        return fuse_estimates(ps, qs)

    def push(self, t: float, position: np.ndarray, quaternion: np.ndarray):
        """Returns (filtered position, filtered quaternion, accepted flag)."""
        position = np.asarray(position, dtype=float)
        quaternion = quat_normalize(quaternion)
        if self._samples:
            avg_p, avg_q = self._window_average()
            pos_jump = float(np.linalg.norm(position - avg_p))
            ang_jump = quat_to_angle(quat_error(quaternion, avg_q))
            if pos_jump > self.cfg.position_threshold_m or ang_jump > self.cfg.angle_threshold_rad:
                self._rejected_in_a_row += 1
                if self._rejected_in_a_row > self.cfg.window:
                    # the "outlier" is persistent: restart from it
                    self._samples.clear()
                    self._samples.append((t, position, quaternion))
                    self._rejected_in_a_row = 0
                    return position.copy(), quaternion.copy(), True
                return avg_p, avg_q, False
        self._samples.append((t, position, quaternion))
        self._rejected_in_a_row = 0
        avg_p, avg_q = self._window_average()
        return avg_p, avg_q, True

    @property
    def sample_count(self) -> int:
        return len(self._samples)

    def window_span(self):
        """(t_first, p_first, q_first, t_last, p_last, q_last) or None."""
        if len(self._samples) < 2:
            return None
        t0, p0, q0 = self._samples[0]
        t1, p1, q1 = self._samples[-1]
        if t1 <= t0:
            return None
        return t0, p0, q0, t1, p1, q1


def filter_and_reject(stream, cfg: CombinerConfig):
    """Offline convenience: run a PoseFilter over (t, p, q) triples."""
    filt = PoseFilter(cfg)
    return [filt.push(t, p, q) for (t, p, q) in stream]


class VelocityEstimator:
    """Linear/angular rates from the ends of the accepted-sample window.

    The body rate follows the attitude kinematics used everywhere else:
    q(t1) = exp(-w (t1-t0) / 2) (x) q(t0) for constant w, hence
    w = -2 log(q1 (x) q0*) / (t1 - t0). Raw differences are smoothed with a
    moving average of the same window length; zeros (or the last smoothed
    value) are held while no span is supplied.
    """

    def __init__(self, cfg: CombinerConfig):
        self.cfg = cfg
        self._raw: deque = deque(maxlen=cfg.window)
        self._velocity = np.zeros(3)
        self._angular = np.zeros(3)

    def update(self, span) -> tuple[np.ndarray, np.ndarray]:
        if span is not None:
            t0, p0, q0, t1, p1, q1 = span
            dt = t1 - t0
            vel = (p1 - p0) / dt
            spin = -2.0 * quat_log(quat_multiply(q1, quat_conjugate(q0))) / dt
            self._raw.append((vel, spin))
            self._velocity = np.mean([r[0] for r in self._raw], axis=0)
            self._angular = np.mean([r[1] for r in self._raw], axis=0)
        return self._velocity.copy(), self._angular.copy()


class EstimateCombiner:
    """Per-target fusion pipeline: cache, fuse, filter, differentiate."""

    def __init__(self, cfg: CombinerConfig | None = None):
        self.cfg = cfg if cfg is not None else CombinerConfig()
        self._latest: dict[int, PoseEstimate] = {}
        self._filter = PoseFilter(self.cfg)
        self._velocities = VelocityEstimator(self.cfg)
        self._position = np.zeros(3)
        self._quaternion = IDENTITY_QUAT.copy()
        self._initialized = False

    def update(self, now: float, estimates: dict[int, PoseEstimate]) -> TargetOdometry:
        """Ingest this tick's world-frame estimates and return fused odometry.

        Estimates must be world-frame; non-converged solutions are ignored.
        A chaser's previous estimate keeps contributing until it goes stale.
        """
        for chaser_id, est in estimates.items():
            if est is None:
                continue
            if est.frame != "world":
                raise ValueError("combiner expects world-frame estimates")
            if not est.converged or not np.isfinite(est.reprojection_rms):
                continue
            self._latest[chaser_id] = est
        fresh = {
            cid: est
            for cid, est in self._latest.items()
            if now - est.timestamp <= self.cfg.staleness_s
        }
        contributors = tuple(sorted(fresh))
        if contributors:
            ps = np.array([fresh[c].pose.position for c in contributors])
            qs = np.array([fresh[c].pose.quaternion for c in contributors])
            fused_p, fused_q = fuse_estimates(ps, qs)
            self._position, self._quaternion, _ = self._filter.push(now, fused_p, fused_q)
            self._initialized = True
        # Differentiating a short baseline of noisy poses produces rate
        # estimates large enough to destabilize anything predicting with
        # them, so velocities stay at their held value (initially zero)
        # until the acceptance window has completely filled.
        span = None
        if contributors and self._filter.sample_count >= self.cfg.window:
            span = self._filter.window_span()
        velocity, angular = self._velocities.update(span)
        return TargetOdometry(
            state=RigidState(self._position, self._quaternion, velocity, angular),
            timestamp=now,
            contributors=contributors,
            healthy=bool(contributors),
            initialized=self._initialized,
        )
