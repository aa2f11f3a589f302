"""Thruster selection for the over-actuated planar chaser.

A planar wrench command (two body forces and a yaw torque) is distributed
over eight unidirectional thrusters by minimizing the squared thrust effort
subject to exact wrench reproduction and per-thruster limits. The continuous
magnitudes then become PWM duty cycles with a minimum on-time gate; thrusts
whose on-time would fall below the gate are rounded to zero or to the gate,
whichever loses less impulse over the period.

The equality-constrained problem is solved through its three-dimensional
dual: the thrust vector is the clipped image of the dual multipliers, and a
damped Newton ascent on the concave dual converges in a handful of steps.
Wrenches outside the attainable set have an unbounded dual; those fall back
to the closest attainable wrench (bounded least squares) with a saturation
flag raised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import lsq_linear

from .dynamics import SLIDER_THRUST_LIMIT, Wrench


@dataclass(frozen=True)
class ThrusterLayout:
    """Body-frame thruster geometry: mount points, unit directions, limits."""

    positions: np.ndarray
    directions: np.ndarray
    max_thrusts: np.ndarray

    def __post_init__(self) -> None:
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float)).copy()
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float)).copy()
        tmax = np.atleast_1d(np.asarray(self.max_thrusts, dtype=float)).copy()
        n = pos.shape[0]
        if pos.shape != (n, 3) or dirs.shape != (n, 3) or tmax.shape != (n,):
            raise ValueError("positions (n,3), directions (n,3), max_thrusts (n,) required")
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("thrust directions must be unit vectors")
        if np.any(tmax <= 0.0):
            raise ValueError("max thrusts must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "max_thrusts", tmax)
        if np.linalg.matrix_rank(self.effectiveness(), tol=1e-9) != 3:
            raise ValueError("layout cannot span planar forces and yaw torque")

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    def effectiveness(self) -> np.ndarray:
        """3 x n matrix mapping thrust magnitudes to (F_x, F_y, tau_z)."""
        n = self.count
        b = np.empty((3, n))
        b[0] = self.directions[:, 0]
        b[1] = self.directions[:, 1]
        b[2] = (
            self.positions[:, 0] * self.directions[:, 1]
            - self.positions[:, 1] * self.directions[:, 0]
        )
        return b

    @classmethod
    def default_slider(cls) -> "ThrusterLayout":
        """Eight thrusters on a square body, two per side near the corners.

        The 0.14 m moment arms and 0.7 N per-thruster limit make a facing
        pair reach 1.4 N of force and a spin quadruple reach 0.392 N*m of
        torque, matching the planar chaser's published actuation limits.
        """
        arm = 0.14
        positions = np.array(
            [
                [-arm, -arm, 0.0],
                [-arm, arm, 0.0],
                [arm, -arm, 0.0],
                [arm, arm, 0.0],
                [-arm, -arm, 0.0],
                [arm, -arm, 0.0],
                [-arm, arm, 0.0],
                [arm, arm, 0.0],
            ]
        )
        directions = np.array(
            [
                [1.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [-1.0, 0.0, 0.0],
                [-1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, -1.0, 0.0],
                [0.0, -1.0, 0.0],
            ]
        )
        return cls(positions, directions, np.full(8, SLIDER_THRUST_LIMIT))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# px py pz dx dy dz max_thrust\n")
            for i in range(self.count):
                row = np.concatenate(
                    (self.positions[i], self.directions[i], [self.max_thrusts[i]])
                )
                fh.write(" ".join(f"{v:.12g}" for v in row) + "\n")

    @classmethod
    def load(cls, path) -> "ThrusterLayout":
        rows = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                values = [float(v) for v in line.split()]
                if len(values) != 7:
                    raise ValueError("each thruster line needs 7 numbers")
                rows.append(values)
        arr = np.array(rows)
        return cls(arr[:, 0:3], arr[:, 3:6], arr[:, 6])


@dataclass(frozen=True)
class AllocationResult:
    thrusts: np.ndarray
    wrench: np.ndarray
    saturated: bool


def _dual_newton(b: np.ndarray, wrench: np.ndarray, tmax: np.ndarray):
    """Maximize the dual of min ||t||^2 s.t. b t = wrench, 0 <= t <= tmax.

    The primal minimizer is t(lam) = clip(b' lam, 0, tmax) and the dual is
    concave and continuously differentiable with gradient wrench - b t(lam).
    Newton steps use the generalized Hessian restricted to unclipped
    coordinates; backtracking keeps the ascent monotone. An unattainable
    wrench makes the dual unbounded, reported here as non-convergence.
    """

    def dual_value(lam: np.ndarray) -> float:
        s = b.T @ lam
        inner = np.where(
            s <= 0.0,
            0.0,
            np.where(s >= tmax, 0.5 * tmax * tmax - s * tmax, -0.5 * s * s),
        )
        return float(wrench @ lam + inner.sum())

    lam = np.zeros(3)
    value = dual_value(lam)
    for _ in range(200):
        s = b.T @ lam
        t = np.clip(s, 0.0, tmax)
        grad = wrench - b @ t
        if np.max(np.abs(grad)) <= 1e-11:
            return t
        free = (s > 0.0) & (s < tmax)
        hess = b[:, free] @ b[:, free].T + 1e-12 * np.eye(3)
        step = np.linalg.solve(hess, grad)
        alpha = 1.0
        while alpha > 1e-14:
            candidate = lam + alpha * step
            cand_value = dual_value(candidate)
            if cand_value >= value + 1e-4 * alpha * float(grad @ step):
                lam = candidate
                value = cand_value
                break
            alpha *= 0.5
        else:
            return None
        if np.linalg.norm(lam) > 1e9:
            return None
    return None


def allocate(wrench: np.ndarray, layout: ThrusterLayout) -> AllocationResult:
    """Thrust magnitudes reproducing the planar wrench with least effort.

    wrench is (F_x, F_y, tau_z) in the body frame. Unattainable commands are
    replaced by the closest attainable wrench and flagged as saturated.
    """
    wrench = np.asarray(wrench, dtype=float)
    if wrench.shape != (3,):
        raise ValueError("planar wrench must be (F_x, F_y, tau_z)")
    b = layout.effectiveness()
    tmax = layout.max_thrusts
    if np.max(np.abs(wrench)) == 0.0:
        return AllocationResult(np.zeros(layout.count), np.zeros(3), False)
    t = _dual_newton(b, wrench, tmax)
    if t is not None:
        return AllocationResult(t, b @ t, False)
    projected = lsq_linear(b, wrench, bounds=(np.zeros(layout.count), tmax))
    t = np.clip(projected.x, 0.0, tmax)
    achievable = b @ t
    polished = _dual_newton(b, achievable, tmax)
    if polished is not None:
        t = polished
    return AllocationResult(t, b @ t, True)


@dataclass(frozen=True)
class PwmCommand:
    """Per-thruster duty cycles against a shared period and on-time gate."""

    duties: np.ndarray
    period_s: float = 0.1
    min_on_time_s: float = 0.01

    def __post_init__(self) -> None:
        duties = np.asarray(self.duties, dtype=float).copy()
        if self.period_s <= 0.0 or not 0.0 <= self.min_on_time_s <= self.period_s:
            raise ValueError("need period > 0 and 0 <= min on-time <= period")
        if np.any(duties < 0.0) or np.any(duties > 1.0 + 1e-12):
            raise ValueError("duties must lie in [0, 1]")
        on_times = duties * self.period_s
        tiny = (on_times > 1e-12) & (on_times < self.min_on_time_s - 1e-12)
        if np.any(tiny):
            raise ValueError("on-times must be zero or at least the minimum on-time")
        object.__setattr__(self, "duties", duties)

    def effective_thrusts(self, layout: ThrusterLayout) -> np.ndarray:
        """Mean thrust over one period per thruster."""
        return self.duties * layout.max_thrusts

    def effective_wrench(self, layout: ThrusterLayout) -> np.ndarray:
        return layout.effectiveness() @ self.effective_thrusts(layout)


def to_pwm(
    thrusts: np.ndarray,
    layout: ThrusterLayout,
    period_s: float = 0.1,
    min_on_time_s: float = 0.01,
) -> PwmCommand:
    """Duty cycles for the commanded thrusts with minimum on-time rounding.

    On-times inside (0, minimum) round to whichever endpoint loses less
    impulse over the period; ties go to the minimum on-time.
    """
    thrusts = np.asarray(thrusts, dtype=float)
    if thrusts.shape != (layout.count,):
        raise ValueError("one thrust per thruster required")
    if np.any(thrusts < -1e-12) or np.any(thrusts > layout.max_thrusts + 1e-9):
        raise ValueError("thrusts must lie within [0, max]")
    duty = np.clip(thrusts, 0.0, layout.max_thrusts) / layout.max_thrusts
    on_times = duty * period_s
    min_duty = min_on_time_s / period_s
    for i in range(duty.shape[0]):
        if 0.0 < on_times[i] < min_on_time_s:
            if on_times[i] < min_on_time_s - on_times[i]:
                duty[i] = 0.0
            else:
                duty[i] = min_duty
    return PwmCommand(duty, period_s, min_on_time_s)


def planar_wrench_vector(wrench: Wrench) -> np.ndarray:
    """Extract (F_x, F_y, tau_z) from a full body wrench."""
    return np.array([wrench.force[0], wrench.force[1], wrench.torque[2]])


def wrench_from_planar(vec: np.ndarray) -> Wrench:
    vec = np.asarray(vec, dtype=float)
    return Wrench(np.array([vec[0], vec[1], 0.0]), np.array([0.0, 0.0, vec[2]]))
