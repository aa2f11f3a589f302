"""Quaternion and SE(3) helpers.

Quaternions are scalar-first ``[w, x, y, z]`` float64 arrays of shape (4,).
Unit quaternions represent rotations through the sandwich product
``v' = q (x) (0, v) (x) q*``; :func:`rotate_vector` applies exactly that map.
Attitude kinematics throughout the package integrate
``qdot = -1/2 (0, omega) (x) q`` with ``omega`` the body rate, and every
consumer of a quaternion (dynamics, vision, estimation, control) sticks to
the same pair of conventions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Return q scaled to unit norm.

    Raises ValueError on (near-)zero input rather than returning garbage.
    """
    q = np.asarray(q, dtype=float)
    n = float(np.linalg.norm(q))
    if not np.isfinite(n) or n < 1e-12:
        raise ValueError(f"cannot normalize quaternion with norm {n!r}")
    return q / n


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a (x) b, scalar-first."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def rotate_vector(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate v by q via q (x) (0, v) (x) q*.

    Uses the expanded two-cross-product form; q must be unit norm.
    """
    qw = q[0]
    qv = np.asarray(q[1:4], dtype=float)
    v = np.asarray(v, dtype=float)
    t = 2.0 * np.cross(qv, v)
    return v + qw * t + np.cross(qv, t)


def quat_error(q: np.ndarray, q_ref: np.ndarray) -> np.ndarray:
    """Error quaternion q (x) q_ref*, canonicalized to w >= 0.

    The two lifts +-e describe the same rotation; picking the non-negative
    scalar part keeps error costs continuous away from 180 degree errors.
    """
    e = quat_multiply(q, quat_conjugate(q_ref))
    if e[0] < 0.0:
        e = -e
    return e


def quat_to_angle(q: np.ndarray) -> float:
    """Rotation angle in [0, pi] represented by q."""
    w = min(1.0, abs(float(q[0])))
    return 2.0 * float(np.arccos(w))


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = float(np.linalg.norm(axis))
    if n < 1e-12:
        raise ValueError("axis must be nonzero")
    half = 0.5 * float(angle)
    return np.concatenate(([np.cos(half)], np.sin(half) * axis / n))


def quat_exp(v: np.ndarray) -> np.ndarray:
    """Exponential of the pure quaternion (0, v); returns a unit quaternion.

    quat_exp(0.5 * axis * angle) equals quat_from_axis_angle(axis, angle).
    """
    v = np.asarray(v, dtype=float)
    th = float(np.linalg.norm(v))
    if th < 1e-12:
        # second-order series keeps the result smooth through zero
        return quat_normalize(np.concatenate(([1.0 - 0.5 * th * th], v)))
    return np.concatenate(([np.cos(th)], np.sin(th) * v / th))


def quat_log(q: np.ndarray) -> np.ndarray:
    """Inverse of quat_exp for unit q with w >= -1: the vector u with quat_exp(u) = +-q."""
    q = np.asarray(q, dtype=float)
    if q[0] < 0.0:
        q = -q
    w = min(1.0, float(q[0]))
    vn = float(np.linalg.norm(q[1:4]))
    if vn < 1e-12:
        return np.array(q[1:4], dtype=float)
    th = float(np.arctan2(vn, w))
    return q[1:4] * (th / vn)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """3x3 matrix R with R @ v == rotate_vector(q, v)."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(rot: np.ndarray) -> np.ndarray:
    """Unit quaternion (w >= 0) for a proper rotation matrix.

    Shepperd's branching on the largest diagonal combination keeps the
    extraction well-conditioned for all attitudes.
    """
    m = np.asarray(rot, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] >= m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    q = quat_normalize(q)
    if q[0] < 0.0:
        q = -q
    return q


@dataclass(frozen=True)
class PoseSE3:
    """Rigid transform: rotation quaternion plus translation."""

    quaternion: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        object.__setattr__(self, "quaternion", np.asarray(self.quaternion, dtype=float).copy())
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).copy())
        if self.quaternion.shape != (4,) or self.position.shape != (3,):
            raise ValueError("PoseSE3 needs a (4,) quaternion and a (3,) position")

    def apply(self, point: np.ndarray) -> np.ndarray:
        return rotate_vector(self.quaternion, point) + self.position

    def compose(self, other: "PoseSE3") -> "PoseSE3":
        """self after other: (self.compose(other)).apply(p) == self.apply(other.apply(p))."""
        return PoseSE3(
            quat_multiply(self.quaternion, other.quaternion),
            rotate_vector(self.quaternion, other.position) + self.position,
        )

    def inverse(self) -> "PoseSE3":
        qc = quat_conjugate(self.quaternion)
        return PoseSE3(qc, -rotate_vector(qc, self.position))
