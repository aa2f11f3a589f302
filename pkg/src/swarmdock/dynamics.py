"""Rigid-body state, parameters, and forward-Euler propagation.

States live in a world frame; rates and commanded wrenches are body-frame
quantities. Translation: pdot = v, vdot = R(q) F / m with R(q) the
body-to-world map of :func:`swarmdock.quat.rotate_vector`. Attitude:
qdot = -1/2 (0, omega) (x) q with omega the body rate, and Euler's equation
omegadot = I^-1 (tau - omega x I omega). Integration is plain forward Euler
with quaternion renormalization after every step; accuracy comes from small
steps, not a fancier scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quat import quat_conjugate, quat_multiply, quat_normalize, rotate_vector

# Slider air-bearing platform (planar scenarios)
SLIDER_MASS = 4.436  # kg
SLIDER_INERTIA_YAW = 1.092  # kg m^2
SLIDER_FORCE_LIMIT = 1.4  # N per body axis
SLIDER_TORQUE_LIMIT = 0.392  # N m about yaw
SLIDER_THRUST_LIMIT = 0.7  # N per thruster


@dataclass(frozen=True)
class RigidState:
    """Pose and rates packed as (position, quaternion, velocity, angular_velocity)."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    quaternion: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        for name, size in (
            ("position", 3),
            ("quaternion", 4),
            ("velocity", 3),
            ("angular_velocity", 3),
        ):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            if arr.shape != (size,):
                raise ValueError(f"{name} must have shape ({size},), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values: {arr}")
            object.__setattr__(self, name, arr)
        n = float(np.linalg.norm(self.quaternion))
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"quaternion must be unit norm, got |q| = {n}")

    def as_vector(self) -> np.ndarray:
        """13-vector [p, q, v, omega]."""
        return np.concatenate(
            (self.position, self.quaternion, self.velocity, self.angular_velocity)
        )

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "RigidState":
        x = np.asarray(x, dtype=float)
        if x.shape != (13,):
            raise ValueError(f"state vector must have shape (13,), got {x.shape}")
        return cls(x[0:3], x[3:7], x[7:10], x[10:13])


@dataclass(frozen=True)
class InertialParams:
    """Mass and body-frame inertia tensor; the inverse is cached at construction."""

    mass: float
    inertia: np.ndarray

    def __post_init__(self) -> None:
        inertia = np.asarray(self.inertia, dtype=float).copy()
        if inertia.shape == (3,):
            inertia = np.diag(inertia)
        if inertia.shape != (3, 3):
            raise ValueError(f"inertia must be (3,3) or a diagonal (3,), got {inertia.shape}")
        if not np.allclose(inertia, inertia.T, atol=1e-9):
            raise ValueError("inertia tensor must be symmetric")
        eig = np.linalg.eigvalsh(inertia)
        if float(self.mass) <= 0.0 or np.any(eig <= 0.0):
            raise ValueError("mass and inertia must be positive definite")
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "inertia_inverse", np.linalg.inv(inertia))

    @classmethod
    def slider(cls) -> "InertialParams":
        # only the yaw entry is physical; roll/pitch are pinned in planar mode
        return cls(SLIDER_MASS, np.diag([SLIDER_INERTIA_YAW] * 3))


@dataclass(frozen=True)
class Wrench:
    """Body-frame force and torque command."""

    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        for name in ("force", "torque"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            if arr.shape != (3,):
                raise ValueError(f"{name} must have shape (3,), got {arr.shape}")
            object.__setattr__(self, name, arr)

    def as_vector(self) -> np.ndarray:
        return np.concatenate((self.force, self.torque))

    @classmethod
    def zero(cls) -> "Wrench":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, u: np.ndarray) -> "Wrench":
        u = np.asarray(u, dtype=float)
        return cls(u[0:3], u[3:6])


@dataclass(frozen=True)
class PlanarMask:
    """Which world translations / body rotation axes stay free.

    Pinned components are held at exactly zero (table-plane coordinates).
    """

    free_translation: tuple[bool, bool, bool] = (True, True, True)
    free_rotation: tuple[bool, bool, bool] = (True, True, True)

    @classmethod
    def full(cls) -> "PlanarMask":
        return cls()

    @classmethod
    def planar(cls) -> "PlanarMask":
        """Air-bearing table: free x, y translation and yaw only."""
        return cls((True, True, False), (False, False, True))


def chaser_derivative(state: RigidState, wrench: Wrench, params: InertialParams) -> np.ndarray:
    """Time derivative of the 13-vector state under a body-frame wrench."""
    q = state.quaternion
    w = state.angular_velocity
    dq = -0.5 * quat_multiply(np.concatenate(([0.0], w)), q)
    dv = rotate_vector(q, wrench.force) / params.mass
    iw = params.inertia @ w
    dw = params.inertia_inverse @ (wrench.torque - np.cross(w, iw))
    out = np.concatenate((state.velocity, dq, dv, dw))
    if not np.all(np.isfinite(out)):
        raise ValueError(f"non-finite state derivative: {out}")
    return out


def target_derivative(state: RigidState) -> np.ndarray:
    """Uncontrolled target: constant linear velocity, constant body spin rate."""
    q = state.quaternion
    w = state.angular_velocity
    dq = -0.5 * quat_multiply(np.concatenate(([0.0], w)), q)
    return np.concatenate((state.velocity, dq, np.zeros(3), np.zeros(3)))


def euler_step(state: RigidState, derivative: np.ndarray, dt: float) -> RigidState:
    """One explicit Euler step; the quaternion is renormalized afterwards."""
    x = state.as_vector() + float(dt) * np.asarray(derivative, dtype=float)
    x[3:7] = quat_normalize(x[3:7])
    return RigidState.from_vector(x)


def apply_planar_mask(state: RigidState, wrench: Wrench, mask: PlanarMask) -> tuple[RigidState, Wrench]:
    """Pin masked components of a state/wrench pair to zero.

    With both roll and pitch pinned the quaternion is flattened to its
    yaw-only part (x, y components zeroed, then renormalized).
    """
    p = state.position.copy()
    v = state.velocity.copy()
    w = state.angular_velocity.copy()
    f = wrench.force.copy()
    t = wrench.torque.copy()
    q = state.quaternion.copy()
    for k in range(3):
        if not mask.free_translation[k]:
            p[k] = 0.0
            v[k] = 0.0
            f[k] = 0.0
        if not mask.free_rotation[k]:
            w[k] = 0.0
            t[k] = 0.0
    if not mask.free_rotation[0] and not mask.free_rotation[1]:
        q[1] = 0.0
        q[2] = 0.0
        q = quat_normalize(q)
    return RigidState(p, q, v, w), Wrench(f, t)


def angular_momentum_world(state: RigidState, params: InertialParams) -> np.ndarray:
    """World-frame angular momentum; conserved under zero torque.

    With the qdot = -1/2 (0, omega) (x) q convention the body-to-world map for
    momentum is rotation by the conjugate quaternion.
    """
    return rotate_vector(quat_conjugate(state.quaternion), params.inertia @ state.angular_velocity)


def kinetic_energy(state: RigidState, params: InertialParams) -> float:
    v = state.velocity
    w = state.angular_velocity
    return 0.5 * params.mass * float(v @ v) + 0.5 * float(w @ (params.inertia @ w))
