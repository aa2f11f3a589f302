"""Centralized receding-horizon controller for a team of chasers.

Each control tick builds one joint optimal-control problem: the target's pose
is rolled forward under constant velocities, per-chaser reference poses are
obtained by transferring fixed body-frame offsets through the predicted
target pose, and a stacked decision vector of every chaser's piecewise
constant input sequence is optimized. Tracking and input costs are weighted
quadratics with an optional linear falloff over the prediction steps;
proximity constraints (minimum distance to the target and between chasers,
maximum distance from the reference) are softened through the solver's
penalty loop while input bounds stay hard via projection.

The heavy lifting (rollout, cost, exact gradient) lives in ``kernels``; this
module owns problem assembly plus an independent plain-numpy evaluation of
the same cost and constraints used to cross-check the kernels in tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dynamics import InertialParams, RigidState, Wrench, euler_step, target_derivative
from .quat import IDENTITY_QUAT, quat_multiply, rotate_vector
from .solver import BoxBounds, SolveReport, SolverConfig, solve


def _weight_matrix(value, size: int, name: str) -> np.ndarray:
    """Accept a scalar, diagonal vector, or full matrix; return a PSD matrix."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = float(arr) * np.eye(size)
    elif arr.ndim == 1:
        if arr.shape != (size,):
            raise ValueError(f"{name} diagonal must have length {size}")
        arr = np.diag(arr)
    if arr.shape != (size, size):
        raise ValueError(f"{name} must be {size}x{size}")
    if not np.allclose(arr, arr.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(arr)[0] < -1e-9:
        raise ValueError(f"{name} must be positive semidefinite")
    return arr


@dataclass(frozen=True)
class NmpcConfig:
    """Horizon, weights, and limits for the receding-horizon problem."""

    horizon_s: float = 3.0
    dt: float = 0.1
    falloff: float = 0.0
    position_weight: np.ndarray = field(default_factory=lambda: 65.0 * np.eye(3))
    attitude_weight: np.ndarray = field(default_factory=lambda: 35.0 * np.eye(4))
    input_weight: np.ndarray = field(
        default_factory=lambda: np.diag([3.5, 3.5, 3.5, 40.0, 40.0, 40.0])
    )
    final_position_weight: np.ndarray = field(default_factory=lambda: 3250.0 * np.eye(3))
    final_attitude_weight: np.ndarray = field(default_factory=lambda: 1750.0 * np.eye(4))
    force_limit: float = 2.0
    torque_limit: float = 0.5
    min_distance: float = 0.35
    max_reference_distance: float = 3.0
    input_reference: np.ndarray = field(default_factory=lambda: np.zeros(6))
    proximity_constraints: bool = True

    def __post_init__(self) -> None:
        if self.horizon_s <= 0.0 or self.dt <= 0.0:
            raise ValueError("horizon and step must be positive")
        ratio = self.horizon_s / self.dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("horizon must be a positive integer multiple of dt")
        if not 0.0 <= self.falloff < 1.0:
            raise ValueError("falloff fraction must lie in [0, 1)")
        if self.force_limit <= 0.0 or self.torque_limit <= 0.0:
            raise ValueError("input limits must be positive")
        if not 0.0 < self.min_distance < self.max_reference_distance:
            raise ValueError("need 0 < min_distance < max_reference_distance")
        object.__setattr__(
            self, "position_weight", _weight_matrix(self.position_weight, 3, "position_weight")
        )
        object.__setattr__(
            self, "attitude_weight", _weight_matrix(self.attitude_weight, 4, "attitude_weight")
        )
        object.__setattr__(
            self, "input_weight", _weight_matrix(self.input_weight, 6, "input_weight")
        )
        object.__setattr__(
            self,
            "final_position_weight",
            _weight_matrix(self.final_position_weight, 3, "final_position_weight"),
        )
        object.__setattr__(
            self,
            "final_attitude_weight",
            _weight_matrix(self.final_attitude_weight, 4, "final_attitude_weight"),
        )
        u_ref = np.asarray(self.input_reference, dtype=float).copy()
        if u_ref.shape != (6,):
            raise ValueError("input_reference must have shape (6,)")
        object.__setattr__(self, "input_reference", u_ref)

    @property
    def steps(self) -> int:
        return int(round(self.horizon_s / self.dt))


@dataclass(frozen=True)
class FormationOffset:
    """Where a chaser should hold station, expressed in the target's frame."""

    position: np.ndarray
    quaternion: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())
    dock_scale: float = 1.0

    def __post_init__(self) -> None:
        p = np.asarray(self.position, dtype=float).copy()
        q = np.asarray(self.quaternion, dtype=float).copy()
        if p.shape != (3,) or q.shape != (4,):
            raise ValueError("offset needs a (3,) position and (4,) quaternion")
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            raise ValueError("offset quaternion must be unit-norm")
        if not 0.0 < self.dock_scale <= 1.0:
            raise ValueError("dock_scale must lie in (0, 1]")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "quaternion", q)


@dataclass(frozen=True)
class DockCommand:
    """Start shrinking one chaser's offset toward its docked scale at a time."""

    chaser_id: int
    start_time: float
    final_scale: float
    ramp_s: float = 30.0

    def __post_init__(self) -> None:
        if self.chaser_id < 0:
            raise ValueError("chaser_id must be non-negative")
        if not 0.0 < self.final_scale <= 1.0:
            raise ValueError("final_scale must lie in (0, 1]")
        if self.ramp_s < 0.0:
            raise ValueError("ramp duration cannot be negative")


@dataclass(frozen=True)
class HorizonPlan:
    """One tick's solution: inputs, predicted motion, and quality flags."""

    inputs: np.ndarray
    states: np.ndarray
    target_states: np.ndarray
    cost: float
    residuals: np.ndarray
    max_violation: float
    converged: bool
    report: SolveReport

    def first_commands(self) -> list[Wrench]:
        return [Wrench.from_vector(self.inputs[n, 0]) for n in range(self.inputs.shape[0])]


def reference_pose(
    target: RigidState, offset: FormationOffset, scale: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Transfer a body-frame offset through the target pose.

    The offset position is shrunk by the current approach scale before the
    transfer; the offset attitude composes on the right of the target's.
    """
    p_ref = target.position + rotate_vector(target.quaternion, scale * offset.position)
    q_ref = quat_multiply(target.quaternion, offset.quaternion)
    return p_ref, q_ref


def rollout_target(target: RigidState, steps: int, dt: float) -> np.ndarray:
    """Predict the target forward: constant velocity, constant body spin."""
    states = np.empty((steps + 1, 13))
    current = target
    states[0] = current.as_vector()
    for j in range(steps):
        current = euler_step(current, target_derivative(current), dt)
        states[j + 1] = current.as_vector()
    return states


def build_references(
    target: RigidState,
    offsets: list[FormationOffset],
    scales: np.ndarray,
    steps: int,
    dt: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-chaser reference pose arrays over the horizon plus the target path."""
    n_ch = len(offsets)
    target_states = rollout_target(target, steps, dt)
    p_ref = np.empty((n_ch, steps + 1, 3))
    q_ref = np.empty((n_ch, steps + 1, 4))
    for j in range(steps + 1):
        tar = RigidState.from_vector(target_states[j])
        for n in range(n_ch):
            p_ref[n, j], q_ref[n, j] = reference_pose(tar, offsets[n], float(scales[n]))
    return p_ref, q_ref, target_states


def _canonical_attitude_error(q: np.ndarray, q_ref: np.ndarray) -> np.ndarray:
    err = quat_multiply(q, np.array([q_ref[0], -q_ref[1], -q_ref[2], -q_ref[3]]))
    if err[0] < 0.0:
        err = -err
    return err - np.array([1.0, 0.0, 0.0, 0.0])


def evaluate_cost(
    states: np.ndarray,
    inputs: np.ndarray,
    p_ref: np.ndarray,
    q_ref: np.ndarray,
    cfg: NmpcConfig,
) -> float:
    """Plain-numpy tracking cost, independent of the compiled kernels.

    Stage position/attitude terms carry the linear falloff weight, the input
    term does not, and the terminal weights add on top of the last stage.
    """
    n_ch, steps = inputs.shape[0], inputs.shape[1]
    total = 0.0
    for n in range(n_ch):
        for j in range(steps + 1):
            fall = 1.0 - cfg.falloff * j / steps
            dp = states[n, j, :3] - p_ref[n, j]
            de = _canonical_attitude_error(states[n, j, 3:7], q_ref[n, j])
            total += fall * (dp @ cfg.position_weight @ dp + de @ cfg.attitude_weight @ de)
            if j == steps:
                total += dp @ cfg.final_position_weight @ dp
                total += de @ cfg.final_attitude_weight @ de
        for j in range(steps):
            du = inputs[n, j] - cfg.input_reference
            total += du @ cfg.input_weight @ du
    return float(total)


def evaluate_constraints(
    states: np.ndarray,
    p_ref: np.ndarray,
    target_states: np.ndarray,
    cfg: NmpcConfig,
) -> np.ndarray:
    """Residual vector with the g <= 0 feasibility convention.

    Per prediction step: minimum distance to the target, pairwise minimum
    distance between chasers (both skipped when proximity constraints are
    off), then maximum distance from each chaser's reference.
    """
    n_ch, steps = states.shape[0], states.shape[1] - 1
    residuals = []
    for j in range(steps + 1):
        if cfg.proximity_constraints:
            for n in range(n_ch):
                dist = float(np.linalg.norm(states[n, j, :3] - target_states[j, :3]))
                residuals.append(cfg.min_distance - dist)
            for n in range(n_ch):
                for m in range(n + 1, n_ch):
                    dist = float(np.linalg.norm(states[n, j, :3] - states[m, j, :3]))
                    residuals.append(cfg.min_distance - dist)
        for n in range(n_ch):
            dist = float(np.linalg.norm(states[n, j, :3] - p_ref[n, j]))
            residuals.append(dist - cfg.max_reference_distance)
    return np.array(residuals)


def docking_schedule(commands, t: float, n_chasers: int) -> np.ndarray:
    """Current per-chaser offset scales given the dock commands issued so far.

    Scales ramp linearly from 1 to the command's final value over its ramp
    duration; chasers without a command stay at 1. Later commands override
    earlier ones for the same chaser.
    """
    scales = np.ones(n_chasers)
    for cmd in sorted(commands, key=lambda c: c.start_time):
        if cmd.chaser_id >= n_chasers:
            raise ValueError("dock command addresses an unknown chaser")
        if t < cmd.start_time:
            continue
        if cmd.ramp_s <= 0.0:
            frac = 1.0
        else:
            frac = min(1.0, (t - cmd.start_time) / cmd.ramp_s)
        scales[cmd.chaser_id] = 1.0 + frac * (cmd.final_scale - 1.0)
    return scales


class NmpcProblem:
    """Adapter between one tick's data and the solver's problem interface."""

    def __init__(
        self,
        x0: np.ndarray,
        p_ref: np.ndarray,
        q_ref: np.ndarray,
        target_positions: np.ndarray,
        masses: np.ndarray,
        inertias: np.ndarray,
        inertia_inverses: np.ndarray,
        cfg: NmpcConfig,
        bounds: BoxBounds,
    ):
        self.x0 = x0
        self.p_ref = p_ref
        self.q_ref = q_ref
        self.target_positions = target_positions
        self.masses = masses
        self.inertias = inertias
        self.inertia_inverses = inertia_inverses
        self.cfg = cfg
        self.bounds = bounds
        self.n_chasers = x0.shape[0]
        self.steps = cfg.steps

    def _kernel_call(self, fn, z: np.ndarray, rho: float):
        u = z.reshape(self.n_chasers, self.steps, 6)
        cfg = self.cfg
        return fn(
            self.x0,
            u,
            cfg.dt,
            self.masses,
            self.inertias,
            self.inertia_inverses,
            self.p_ref,
            self.q_ref,
            self.target_positions,
            cfg.position_weight,
            cfg.attitude_weight,
            cfg.input_weight,
            cfg.final_position_weight,
            cfg.final_attitude_weight,
            cfg.falloff,
            cfg.input_reference,
            rho,
            cfg.min_distance,
            cfg.max_reference_distance,
            cfg.proximity_constraints,
        )

    def objective_grad(self, z: np.ndarray, rho: float):
        phi, _, _, _, _, grad = self._kernel_call(kernels.objective_grad, z, rho)
        return float(phi), grad.reshape(-1)

    def constraint_violation(self, z: np.ndarray) -> float:
        _, _, _, viol, _ = self._kernel_call(kernels.objective, z, 0.0)
        return float(viol)

    def evaluate(self, z: np.ndarray):
        """(tracking cost, max violation, predicted states) at a decision vector."""
        track, _, _, viol, xs = self._kernel_call(kernels.objective, z, 0.0)
        return float(track), float(viol), xs


def input_bounds(cfg: NmpcConfig, n_chasers: int, planar: bool = False) -> BoxBounds:
    """Hard per-component input box, replicated across chasers and steps.

    Planar mode pins the out-of-plane components (vertical force, roll and
    pitch torques) to zero so projection keeps them inactive.
    """
    lo_step = np.array(
        [-cfg.force_limit] * 3 + [-cfg.torque_limit] * 3
    )
    hi_step = -lo_step
    if planar:
        for idx in (2, 3, 4):
            lo_step[idx] = 0.0
            hi_step[idx] = 0.0
    lower = np.tile(lo_step, n_chasers * cfg.steps)
    upper = np.tile(hi_step, n_chasers * cfg.steps)
    return BoxBounds(lower, upper)


class NmpcController:
    """Stateful wrapper: warm starts, bounds, and one solve per control tick."""

    def __init__(
        self,
        cfg: NmpcConfig,
        offsets: list[FormationOffset],
        chaser_params: list[InertialParams],
        solver_cfg: SolverConfig | None = None,
        planar: bool = False,
    ):
        if len(offsets) == 0 or len(offsets) != len(chaser_params):
            raise ValueError("need one offset and one parameter set per chaser")
        if planar and cfg.proximity_constraints:
            raise ValueError("planar mode removes proximity constraints; disable them")
        self.cfg = cfg
        self.offsets = list(offsets)
        self.solver_cfg = solver_cfg if solver_cfg is not None else SolverConfig()
        self.planar = planar
        self.n_chasers = len(offsets)
        self.masses = np.array([p.mass for p in chaser_params])
        self.inertias = np.stack([p.inertia for p in chaser_params])
        self.inertia_inverses = np.stack([p.inertia_inverse for p in chaser_params])
        self.bounds = input_bounds(cfg, self.n_chasers, planar)
        self._warm = np.zeros((self.n_chasers, cfg.steps, 6))

    def reset(self) -> None:
        self._warm[:] = 0.0

    def step(
        self,
        target: RigidState,
        chaser_states: list[RigidState],
        scales: np.ndarray | None = None,
        trace=None,
    ) -> HorizonPlan:
        """Solve one tick and advance the warm start (shift, repeat last input)."""
        if len(chaser_states) != self.n_chasers:
            raise ValueError("wrong number of chaser states")
        if scales is None:
            scales = np.ones(self.n_chasers)
        cfg = self.cfg
        p_ref, q_ref, target_states = build_references(
            target, self.offsets, scales, cfg.steps, cfg.dt
        )
        x0 = np.stack([s.as_vector() for s in chaser_states])
        problem = NmpcProblem(
            x0,
            p_ref,
            q_ref,
            np.ascontiguousarray(target_states[:, :3]),
            self.masses,
            self.inertias,
            self.inertia_inverses,
            cfg,
            self.bounds,
        )
        z, report = solve(problem, self._warm.reshape(-1), self.solver_cfg, trace=trace)
        inputs = z.reshape(self.n_chasers, cfg.steps, 6)
        self._warm[:, :-1] = inputs[:, 1:]
        self._warm[:, -1] = inputs[:, -1]
        cost, viol, states = problem.evaluate(z)
        residuals = evaluate_constraints(states, p_ref, target_states, cfg)
        return HorizonPlan(
            inputs=inputs,
            states=states,
            target_states=target_states,
            cost=cost,
            residuals=residuals,
            max_violation=viol,
            converged=report.converged,
            report=report,
        )
