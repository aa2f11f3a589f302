"""Closed-loop scenario engine and the built-in experiment suite.

Each control tick: synthesize camera observations of the target per chaser,
recover per-chaser pose estimates, fuse them into one target odometry, update
the docking schedule, solve the receding-horizon problem, and apply the first
input of each sequence (through thrust allocation and PWM in planar mode)
while the truth states integrate at a finer fixed substep. Everything is
seeded and deterministic; logs are plain arrays with CSV writers.

Metrics follow the reporting conventions used throughout: position/attitude
errors are measured against the unscaled reference pose derived from the
true target state, so commanded docking approaches show up as growing
reported error by construction.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .allocation import ThrusterLayout, allocate, planar_wrench_vector, to_pwm, wrench_from_planar
from .dynamics import (
    InertialParams,
    PlanarMask,
    RigidState,
    SLIDER_FORCE_LIMIT,
    SLIDER_TORQUE_LIMIT,
    Wrench,
    apply_planar_mask,
    chaser_derivative,
    euler_step,
    target_derivative,
)
from .estimation import EstimateCombiner
from .nmpc import DockCommand, FormationOffset, NmpcConfig, NmpcController, docking_schedule, reference_pose
from .quat import IDENTITY_QUAT, PoseSE3, quat_error, quat_from_axis_angle, quat_to_angle
from .scenario import ChaserSetup, ScenarioConfig, ScenarioEvent, VisionSettings
from .vision import PoseEstimate, camera_pose, estimate_to_world, observe, solve_pnp

TARGET_LINEAR_VELOCITY = np.array([1.50e-2, 0.75e-2, 3.00e-2])
TARGET_ANGULAR_VELOCITY = np.array([1.50e-2, 4.50e-2, 3.00e-2])


def derive_seed(master: int, family: str, rep: int) -> int:
    """Stable per-run seed from one master seed.

    Repetition indices share seeds across sweep grid points (same family), so
    trend comparisons across the grid run on common noise draws.
    """
    digest = hashlib.sha256(f"{master}:{family}:{rep}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def facing_attitude(direction: np.ndarray) -> np.ndarray:
    """Quaternion rotating the camera axis (+x) onto -direction."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    look = -d
    x_axis = np.array([1.0, 0.0, 0.0])
    c = float(x_axis @ look)
    if c > 1.0 - 1e-12:
        return IDENTITY_QUAT.copy()
    if c < -1.0 + 1e-12:
        return quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), np.pi)
    axis = np.cross(x_axis, look)
    axis /= np.linalg.norm(axis)
    return quat_from_axis_angle(axis, float(np.arccos(c)))


def chaser_at_offset(
    target: RigidState,
    direction,
    distance: float,
    dock_scale: float = 1.0,
    params: InertialParams | None = None,
) -> ChaserSetup:
    """A chaser parked exactly on its reference pose with zero velocities."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    offset = FormationOffset(
        position=distance * d, quaternion=facing_attitude(d), dock_scale=dock_scale
    )
    p_ref, q_ref = reference_pose(target, offset)
    state = RigidState(p_ref, q_ref, np.zeros(3), np.zeros(3))
    if params is None:
        params = InertialParams(mass=1.0, inertia=np.eye(3))
    return ChaserSetup(initial_state=state, offset=offset, params=params)


@dataclass
class RunLog:
    """Uniform per-tick history of one scenario run."""

    scenario: ScenarioConfig
    time: np.ndarray
    target_truth: np.ndarray
    chaser_truth: np.ndarray
    requested: np.ndarray
    commands: np.ndarray
    ref_positions: np.ndarray
    ref_quaternions: np.ndarray
    scaled_ref_positions: np.ndarray
    scales: np.ndarray
    est_position: np.ndarray
    est_quaternion: np.ndarray
    est_velocity: np.ndarray
    est_angular: np.ndarray
    est_contributor_mask: np.ndarray
    est_healthy: np.ndarray
    chaser_has_estimate: np.ndarray
    est_target_error: np.ndarray
    pos_error: np.ndarray
    att_error: np.ndarray
    target_distance: np.ndarray
    solver_cost: np.ndarray
    solver_violation: np.ndarray
    solver_inner: np.ndarray
    solver_outer: np.ndarray
    solver_evals: np.ndarray
    solver_converged: np.ndarray
    solver_wall: np.ndarray
    failed: bool
    failure_time: float | None

    @property
    def ticks(self) -> int:
        return self.time.shape[0]

    @property
    def n_chasers(self) -> int:
        return self.chaser_truth.shape[1]

    def to_csv(self, path) -> None:
        """One wide CSV row per tick; wall-clock timing intentionally omitted."""
        state_cols = ["px", "py", "pz", "qw", "qx", "qy", "qz", "vx", "vy", "vz", "wx", "wy", "wz"]
        header = ["t"]
        header += [f"tgt_{c}" for c in state_cols]
        header += ["est_px", "est_py", "est_pz", "est_qw", "est_qx", "est_qy", "est_qz"]
        header += ["est_vx", "est_vy", "est_vz", "est_wx", "est_wy", "est_wz"]
        header += ["est_contributors", "est_healthy", "est_target_err"]
        header += ["solver_cost", "solver_violation", "solver_inner", "solver_outer",
                   "solver_evals", "solver_converged"]
        for i in range(self.n_chasers):
            header += [f"c{i}_{c}" for c in state_cols]
            header += [f"c{i}_cmd_{c}" for c in ("fx", "fy", "fz", "tx", "ty", "tz")]
            header += [f"c{i}_ref_px", f"c{i}_ref_py", f"c{i}_ref_pz"]
            header += [f"c{i}_ref_qw", f"c{i}_ref_qx", f"c{i}_ref_qy", f"c{i}_ref_qz"]
            header += [f"c{i}_scale", f"c{i}_pos_err", f"c{i}_att_err",
                       f"c{i}_tgt_dist", f"c{i}_has_est"]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for k in range(self.ticks):
                row = [self.time[k]]
                row += list(self.target_truth[k])
                row += list(self.est_position[k]) + list(self.est_quaternion[k])
                row += list(self.est_velocity[k]) + list(self.est_angular[k])
                row += [self.est_contributor_mask[k], int(self.est_healthy[k]),
                        self.est_target_error[k]]
                row += [self.solver_cost[k], self.solver_violation[k], self.solver_inner[k],
                        self.solver_outer[k], self.solver_evals[k], int(self.solver_converged[k])]
                for i in range(self.n_chasers):
                    row += list(self.chaser_truth[k, i])
                    row += list(self.commands[k, i])
                    row += list(self.ref_positions[k, i])
                    row += list(self.ref_quaternions[k, i])
                    row += [self.scales[k, i], self.pos_error[k, i], self.att_error[k, i],
                            self.target_distance[k, i], int(self.chaser_has_estimate[k, i])]
                fh.write(",".join(f"{v:.12g}" for v in row) + "\n")

    def write_figure_data(self, out_dir) -> None:
        """Per-figure CSV bundles: trajectories, pose errors, docking distances."""
        import os

        n = self.n_chasers
        with open(os.path.join(out_dir, "trajectories.csv"), "w", encoding="utf-8") as fh:
            cols = ["t", "tgt_px", "tgt_py", "tgt_pz"]
            for i in range(n):
                cols += [f"c{i}_px", f"c{i}_py", f"c{i}_pz"]
            fh.write(",".join(cols) + "\n")
            for k in range(self.ticks):
                row = [self.time[k]] + list(self.target_truth[k, :3])
                for i in range(n):
                    row += list(self.chaser_truth[k, i, :3])
                fh.write(",".join(f"{v:.12g}" for v in row) + "\n")
        with open(os.path.join(out_dir, "pose_errors.csv"), "w", encoding="utf-8") as fh:
            cols = ["t"]
            for i in range(n):
                cols += [f"c{i}_pos_err", f"c{i}_att_err"]
            fh.write(",".join(cols) + "\n")
            for k in range(self.ticks):
                row = [self.time[k]]
                for i in range(n):
                    row += [self.pos_error[k, i], self.att_error[k, i]]
                fh.write(",".join(f"{v:.12g}" for v in row) + "\n")
        with open(os.path.join(out_dir, "docking.csv"), "w", encoding="utf-8") as fh:
            cols = ["t"]
            for i in range(n):
                cols += [f"c{i}_tgt_dist", f"c{i}_scaled_ref_dist", f"c{i}_scale"]
            fh.write(",".join(cols) + "\n")
            for k in range(self.ticks):
                row = [self.time[k]]
                for i in range(n):
                    scaled = np.linalg.norm(
                        self.chaser_truth[k, i, :3] - self.scaled_ref_positions[k, i]
                    )
                    row += [self.target_distance[k, i], scaled, self.scales[k, i]]
                fh.write(",".join(f"{v:.12g}" for v in row) + "\n")


@dataclass(frozen=True)
class MetricsSummary:
    position_mse: np.ndarray
    orientation_mse: np.ndarray
    min_target_distance: np.ndarray
    min_interchaser_distance: float
    final_target_distance: np.ndarray
    final_scaled_ref_distance: np.ndarray
    failed: bool
    failure_time: float | None
    simulated_s: float

    def to_dict(self) -> dict:
        def clean(x):
            return None if not np.isfinite(x) else float(x)

        return {
            "position_mse": [float(v) for v in self.position_mse],
            "orientation_mse": [float(v) for v in self.orientation_mse],
            "min_target_distance": [float(v) for v in self.min_target_distance],
            "min_interchaser_distance": clean(self.min_interchaser_distance),
            "final_target_distance": [float(v) for v in self.final_target_distance],
            "final_scaled_ref_distance": [float(v) for v in self.final_scaled_ref_distance],
            "failed": bool(self.failed),
            "failure_time": None if self.failure_time is None else float(self.failure_time),
            "simulated_s": float(self.simulated_s),
        }


def compute_metrics(log: RunLog) -> MetricsSummary:
    """Table-style summary of one run; errors are against unscaled references."""
    if log.ticks == 0:
        raise ValueError("cannot summarize an empty log")
    n = log.n_chasers
    pos_mse = np.mean(log.pos_error ** 2, axis=0)
    att_mse = np.mean(log.att_error ** 2, axis=0)
    min_tgt = np.min(log.target_distance, axis=0)
    min_pair = np.inf
    for a in range(n):
        for b in range(a + 1, n):
            d = np.linalg.norm(log.chaser_truth[:, a, :3] - log.chaser_truth[:, b, :3], axis=1)
            min_pair = min(min_pair, float(d.min()))
    final_tgt = log.target_distance[-1].copy()
    final_scaled = np.linalg.norm(
        log.chaser_truth[-1, :, :3] - log.scaled_ref_positions[-1], axis=1
    )
    return MetricsSummary(
        position_mse=pos_mse,
        orientation_mse=att_mse,
        min_target_distance=min_tgt,
        min_interchaser_distance=min_pair,
        final_target_distance=final_tgt,
        final_scaled_ref_distance=final_scaled,
        failed=log.failed,
        failure_time=log.failure_time,
        simulated_s=float(log.time[-1] + 1.0 / log.scenario.control_rate_hz),
    )


def _shift_estimate(est: PoseEstimate, shift: np.ndarray) -> PoseEstimate:
    return PoseEstimate(
        pose=PoseSE3(est.pose.quaternion, est.pose.position + shift),
        timestamp=est.timestamp,
        frame=est.frame,
        reprojection_rms=est.reprojection_rms,
        corner_count=est.corner_count,
        converged=est.converged,
    )


def run(cfg: ScenarioConfig) -> RunLog:
    """Execute one scenario tick by tick; deterministic for a fixed config."""
    planar = cfg.mode == "planar"
    n = len(cfg.chasers)
    period = 1.0 / cfg.control_rate_hz
    substeps = max(1, int(round(period / cfg.physics_substep_s)))
    sub_dt = period / substeps
    mask = PlanarMask.planar() if planar else PlanarMask.full()

    target = cfg.target
    chasers = [ch.initial_state for ch in cfg.chasers]
    params = [ch.params for ch in cfg.chasers]
    if planar:
        target, _ = apply_planar_mask(target, Wrench.zero(), mask)
        chasers = [apply_planar_mask(c, Wrench.zero(), mask)[0] for c in chasers]

    controller = NmpcController(
        cfg.nmpc,
        [ch.offset for ch in cfg.chasers],
        params,
        solver_cfg=cfg.solver,
        planar=planar,
    )
    offsets = controller.offsets
    combiner = EstimateCombiner(cfg.combiner)
    marker_layout = cfg.vision.marker_layout()
    thrusters = ThrusterLayout.default_slider() if planar else None

    ticks = cfg.ticks
    log = RunLog(
        scenario=cfg,
        time=np.zeros(ticks),
        target_truth=np.zeros((ticks, 13)),
        chaser_truth=np.zeros((ticks, n, 13)),
        requested=np.zeros((ticks, n, 6)),
        commands=np.zeros((ticks, n, 6)),
        ref_positions=np.zeros((ticks, n, 3)),
        ref_quaternions=np.zeros((ticks, n, 4)),
        scaled_ref_positions=np.zeros((ticks, n, 3)),
        scales=np.ones((ticks, n)),
        est_position=np.zeros((ticks, 3)),
        est_quaternion=np.zeros((ticks, 4)),
        est_velocity=np.zeros((ticks, 3)),
        est_angular=np.zeros((ticks, 3)),
        est_contributor_mask=np.zeros(ticks, dtype=np.int64),
        est_healthy=np.zeros(ticks, dtype=bool),
        chaser_has_estimate=np.zeros((ticks, n), dtype=bool),
        est_target_error=np.full(ticks, np.inf),
        pos_error=np.zeros((ticks, n)),
        att_error=np.zeros((ticks, n)),
        target_distance=np.zeros((ticks, n)),
        solver_cost=np.zeros(ticks),
        solver_violation=np.zeros(ticks),
        solver_inner=np.zeros(ticks, dtype=np.int64),
        solver_outer=np.zeros(ticks, dtype=np.int64),
        solver_evals=np.zeros(ticks, dtype=np.int64),
        solver_converged=np.zeros(ticks, dtype=bool),
        solver_wall=np.zeros(ticks),
        failed=False,
        failure_time=None,
    )

    pending = list(cfg.events)
    dock_commands: list[DockCommand] = []
    outlier_shifts: dict[int, np.ndarray] = {}
    commands = [Wrench.zero() for _ in range(n)]
    rows = 0

    for k in range(ticks):
        t = k * period
        while pending and pending[0].time <= t + 1e-12:
            ev = pending.pop(0)
            if ev.kind == "dock":
                dock_commands.append(
                    DockCommand(ev.chaser_id, ev.time, ev.scale, ev.ramp_s)
                )
            elif ev.kind == "set_offset":
                old = offsets[ev.chaser_id]
                offsets[ev.chaser_id] = FormationOffset(
                    position=ev.vector,
                    quaternion=old.quaternion if ev.quaternion is None else ev.quaternion,
                    dock_scale=old.dock_scale,
                )
            elif ev.kind == "set_target_velocity":
                target = RigidState(
                    target.position,
                    target.quaternion,
                    target.velocity if ev.vector is None else ev.vector,
                    target.angular_velocity if ev.angular is None else ev.angular,
                )
            elif ev.kind == "nudge_target":
                dv = np.zeros(3) if ev.vector is None else ev.vector
                dw = np.zeros(3) if ev.angular is None else ev.angular
                target = RigidState(
                    target.position, target.quaternion,
                    target.velocity + dv, target.angular_velocity + dw,
                )
            elif ev.kind == "inject_estimate_outlier":
                outlier_shifts[ev.chaser_id] = ev.vector

        scales = docking_schedule(dock_commands, t, n)

        estimates: dict[int, PoseEstimate] = {}
        if cfg.estimator == "vision":
            for i in range(n):
                rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, k, i]))
                cam = camera_pose(chasers[i])
                obs = observe(
                    cfg.vision.intrinsics, cam, target, marker_layout,
                    cfg.vision.pixel_noise, rng, timestamp=t, chaser_id=i,
                )
                est = solve_pnp(cfg.vision.intrinsics, obs, marker_layout)
                if est is not None and est.converged:
                    world = estimate_to_world(est, cam)
                    if i in outlier_shifts:
                        world = _shift_estimate(world, outlier_shifts.pop(i))
                    estimates[i] = world
                    log.chaser_has_estimate[k, i] = True
            odom = combiner.update(t, estimates)
            est_ready = odom.initialized
            target_est = odom.state
            log.est_contributor_mask[k] = sum(1 << c for c in odom.contributors)
            log.est_healthy[k] = odom.healthy
        else:
            target_est = target
            est_ready = True
            log.chaser_has_estimate[k, :] = True
            log.est_contributor_mask[k] = (1 << n) - 1
            log.est_healthy[k] = True

        if est_ready:
            plan = controller.step(target_est, chasers, scales)
            commands = plan.first_commands()
            log.solver_cost[k] = plan.cost
            log.solver_violation[k] = plan.max_violation
            log.solver_inner[k] = plan.report.inner_iterations
            log.solver_outer[k] = plan.report.outer_iterations
            log.solver_evals[k] = plan.report.function_evaluations
            log.solver_converged[k] = plan.converged
            log.solver_wall[k] = plan.report.wall_time_s
            log.est_target_error[k] = float(
                np.linalg.norm(target_est.position - target.position)
            )

        applied = []
        for i in range(n):
            w = commands[i]
            log.requested[k, i] = w.as_vector()
            if planar:
                alloc = allocate(planar_wrench_vector(w), thrusters)
                pwm = to_pwm(alloc.thrusts, thrusters, cfg.pwm_period_s, cfg.pwm_min_on_s)
                w = wrench_from_planar(pwm.effective_wrench(thrusters))
            applied.append(w)
            log.commands[k, i] = w.as_vector()

        log.time[k] = t
        log.target_truth[k] = target.as_vector()
        log.est_position[k] = target_est.position
        log.est_quaternion[k] = target_est.quaternion
        log.est_velocity[k] = target_est.velocity
        log.est_angular[k] = target_est.angular_velocity
        log.scales[k] = scales
        for i in range(n):
            log.chaser_truth[k, i] = chasers[i].as_vector()
            p_ref, q_ref = reference_pose(target, offsets[i], 1.0)
            p_scaled, _ = reference_pose(target, offsets[i], float(scales[i]))
            log.ref_positions[k, i] = p_ref
            log.ref_quaternions[k, i] = q_ref
            log.scaled_ref_positions[k, i] = p_scaled
            log.pos_error[k, i] = np.linalg.norm(chasers[i].position - p_ref)
            log.att_error[k, i] = quat_to_angle(quat_error(chasers[i].quaternion, q_ref))
            log.target_distance[k, i] = np.linalg.norm(chasers[i].position - target.position)
        rows = k + 1

        if np.max(log.pos_error[k]) > cfg.failure_distance_m:
            log.failed = True
            log.failure_time = t
            break

        for _ in range(substeps):
            stepped = []
            for i in range(n):
                deriv = chaser_derivative(chasers[i], applied[i], params[i])
                deriv[7:10] += cfg.disturbance_accel
                try:
                    state = euler_step(chasers[i], deriv, sub_dt)
                except ValueError as exc:
                    raise RuntimeError(
                        f"chaser {i} state became invalid at t={t:.3f}: {exc}"
                    ) from exc
                if planar:
                    state, _ = apply_planar_mask(state, applied[i], mask)
                stepped.append(state)
            chasers = stepped
            target = euler_step(target, target_derivative(target), sub_dt)
            if planar:
                target, _ = apply_planar_mask(target, Wrench.zero(), mask)

    if rows < ticks:
        for name in (
            "time", "target_truth", "chaser_truth", "requested", "commands",
            "ref_positions", "ref_quaternions", "scaled_ref_positions", "scales",
            "est_position", "est_quaternion", "est_velocity", "est_angular",
            "est_contributor_mask", "est_healthy", "chaser_has_estimate",
            "est_target_error", "pos_error", "att_error", "target_distance",
            "solver_cost", "solver_violation", "solver_inner", "solver_outer",
            "solver_evals", "solver_converged", "solver_wall",
        ):
            setattr(log, name, getattr(log, name)[:rows])
    return log


def write_run_outputs(log: RunLog, out_dir) -> dict:
    """Persist log.csv, figure bundles, and summary.json; returns the summary."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    log.to_csv(os.path.join(out_dir, "log.csv"))
    log.write_figure_data(out_dir)
    metrics = compute_metrics(log)
    summary = {
        "name": log.scenario.name,
        "seed": int(log.scenario.seed),
        "mode": log.scenario.mode,
        "estimator": log.scenario.estimator,
        "chasers": log.n_chasers,
        "grid": {
            "horizon_s": float(log.scenario.nmpc.horizon_s),
            "dt": float(log.scenario.nmpc.dt),
            "falloff": float(log.scenario.nmpc.falloff),
        },
        "metrics": metrics.to_dict(),
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def single_chaser_scenario(
    name: str,
    seed: int,
    horizon_s: float = 3.0,
    dt: float = 0.1,
    falloff: float = 0.0,
    duration_s: float = 120.0,
    estimator: str = "vision",
) -> ScenarioConfig:
    """Tracking scenario matching the published single-chaser sweep setup."""
    target = RigidState(
        np.zeros(3), IDENTITY_QUAT, TARGET_LINEAR_VELOCITY, TARGET_ANGULAR_VELOCITY
    )
    chaser = chaser_at_offset(target, [-1.0, 0.0, 0.0], 1.5)
    return ScenarioConfig(
        name=name,
        target=target,
        chasers=(chaser,),
        duration_s=duration_s,
        control_rate_hz=1.0 / dt,
        seed=seed,
        estimator=estimator,
        nmpc=NmpcConfig(horizon_s=horizon_s, dt=dt, falloff=falloff),
    )


def two_chaser_scenario(name: str, seed: int, duration_s: float = 120.0) -> ScenarioConfig:
    """Two chasers share estimates; one take of fused-estimation robustness."""
    target = RigidState(
        np.zeros(3), IDENTITY_QUAT, TARGET_LINEAR_VELOCITY, TARGET_ANGULAR_VELOCITY
    )
    chasers = (
        chaser_at_offset(target, [-1.0, 0.0, 0.0], 1.5),
        chaser_at_offset(target, [0.0, -1.0, 0.0], 1.5),
    )
    events = (
        ScenarioEvent(
            kind="inject_estimate_outlier",
            time=duration_s / 2.0,
            chaser_id=1,
            vector=np.array([1.0, 0.0, 0.0]),
        ),
    )
    return ScenarioConfig(
        name=name,
        target=target,
        chasers=chasers,
        duration_s=duration_s,
        seed=seed,
        events=events,
    )


def four_chaser_docking_scenario(
    name: str, seed: int, duration_s: float = 120.0
) -> ScenarioConfig:
    """Four chasers hold formation; two receive a mid-run docking approach.

    The approach starts at half time and ramps over a quarter, so the last
    quarter holds the docked offsets.
    """
    target = RigidState(
        np.zeros(3), IDENTITY_QUAT, TARGET_LINEAR_VELOCITY, TARGET_ANGULAR_VELOCITY
    )
    chasers = (
        chaser_at_offset(target, [-1.0, 0.0, 0.0], 1.5, dock_scale=0.3),
        chaser_at_offset(target, [0.0, 1.0, 0.0], 1.5),
        chaser_at_offset(target, [0.0, -1.0, 0.0], 1.5),
        chaser_at_offset(target, [1.0, 0.0, 0.0], 1.5, dock_scale=0.3),
    )
    start = duration_s / 2.0
    ramp = duration_s / 4.0
    events = (
        ScenarioEvent(kind="dock", time=start, chaser_id=0, scale=0.3, ramp_s=ramp),
        ScenarioEvent(kind="dock", time=start, chaser_id=3, scale=0.3, ramp_s=ramp),
    )
    return ScenarioConfig(
        name=name,
        target=target,
        chasers=chasers,
        duration_s=duration_s,
        seed=seed,
        events=events,
    )


def collision_scenario(name: str, seed: int, duration_s: float = 120.0) -> ScenarioConfig:
    """Chaser 0's reference flips to the far side of a static target.

    The straight path would cut through the keep-out sphere, so the solved
    trajectory has to curve around it while the observing chaser 1 supplies
    target estimates during the LoS gap. The target neither translates nor
    spins here; the scenario isolates the avoidance maneuver.
    """
    target = RigidState(np.zeros(3), IDENTITY_QUAT, np.zeros(3), np.zeros(3))
    chasers = (
        chaser_at_offset(target, [-1.0, 0.0, 0.0], 1.5),
        chaser_at_offset(target, [0.0, -1.0, 0.0], 1.5),
    )
    events = (
        ScenarioEvent(
            kind="set_offset",
            time=duration_s / 4.0,
            chaser_id=0,
            vector=np.array([1.5, 0.0, 0.0]),
            quaternion=facing_attitude(np.array([1.0, 0.0, 0.0])),
        ),
    )
    return ScenarioConfig(
        name=name,
        target=target,
        chasers=chasers,
        duration_s=duration_s,
        seed=seed,
        events=events,
    )


def planar_docking_scenario(
    name: str,
    seed: int,
    moving_target: bool,
    estimator: str = "vision",
    duration_s: float = 60.0,
) -> ScenarioConfig:
    """Air-bearing docking approach to a 0.20 m terminal distance."""
    if moving_target:
        target = RigidState(
            np.zeros(3), IDENTITY_QUAT,
            np.array([0.02, 0.01, 0.0]), np.array([0.0, 0.0, 0.02]),
        )
    else:
        target = RigidState(np.zeros(3), IDENTITY_QUAT, np.zeros(3), np.zeros(3))
    chaser = chaser_at_offset(
        target, [-1.0, 0.0, 0.0], 0.5, dock_scale=0.4, params=InertialParams.slider()
    )
    nmpc = NmpcConfig(
        force_limit=SLIDER_FORCE_LIMIT,
        torque_limit=SLIDER_TORQUE_LIMIT,
        proximity_constraints=False,
    )
    vision = VisionSettings(
        pixel_noise=1.0, cube_half_size=0.10, marker_half_size=0.03,
    )
    events = (
        ScenarioEvent(kind="dock", time=duration_s / 4.0, chaser_id=0, scale=0.4,
                      ramp_s=duration_s / 4.0),
    )
    return ScenarioConfig(
        name=name,
        target=target,
        chasers=(chaser,),
        mode="planar",
        duration_s=duration_s,
        seed=seed,
        estimator=estimator,
        nmpc=nmpc,
        vision=vision,
        events=events,
    )


SWEEP_HORIZONS = (0.5, 3.0, 10.0)
SWEEP_STEPS = (1.0 / 5.0, 1.0 / 10.0, 1.0 / 30.0)
SWEEP_FALLOFFS = (0.0, 0.1, 0.3, 0.6)
SWEEP_REPETITIONS = 3


def sweep_grid() -> list[tuple[float, float, float]]:
    """Unique (horizon, dt, falloff) points: vary one knob from the baseline."""
    points = []
    for horizon in SWEEP_HORIZONS:
        points.append((horizon, 0.1, 0.0))
    for dt in SWEEP_STEPS:
        point = (3.0, dt, 0.0)
        if point not in points:
            points.append(point)
    for falloff in SWEEP_FALLOFFS:
        point = (3.0, 0.1, falloff)
        if point not in points:
            points.append(point)
    return points


def sweep_scenarios(master_seed: int, duration_s: float = 120.0) -> list[ScenarioConfig]:
    """The full single-chaser grid, three repetitions per point.

    Repetition seeds are shared across grid points so trend claims compare
    like against like.
    """
    configs = []
    for horizon, dt, falloff in sweep_grid():
        for rep in range(SWEEP_REPETITIONS):
            name = f"sweep_T{horizon:g}_dt{dt:.4f}_a{falloff:g}_rep{rep}"
            configs.append(
                single_chaser_scenario(
                    name,
                    derive_seed(master_seed, "sweep", rep),
                    horizon_s=horizon,
                    dt=dt,
                    falloff=falloff,
                    duration_s=duration_s,
                )
            )
    return configs


def scenario_suite(master_seed: int = 0, duration_s: float | None = None) -> list[ScenarioConfig]:
    """Every built-in experiment: sweep, multi-chaser, collision, planar.

    A duration override shortens every scenario uniformly (event times are
    fractions of the duration), preserving the suite's structure for quick
    determinism checks.
    """
    orbital = 120.0 if duration_s is None else duration_s
    planar = 60.0 if duration_s is None else duration_s
    configs = sweep_scenarios(master_seed, duration_s=orbital)
    configs.append(
        two_chaser_scenario(
            "two_chaser", derive_seed(master_seed, "two_chaser", 0), duration_s=orbital
        )
    )
    configs.append(
        four_chaser_docking_scenario(
            "four_chaser_dock", derive_seed(master_seed, "four_chaser_dock", 0),
            duration_s=orbital,
        )
    )
    configs.append(
        collision_scenario(
            "collision", derive_seed(master_seed, "collision", 0), duration_s=orbital
        )
    )
    for moving in (False, True):
        for estimator in ("ground_truth", "vision"):
            tag = "moving" if moving else "static"
            name = f"planar_dock_{tag}_{estimator}"
            configs.append(
                planar_docking_scenario(
                    name, derive_seed(master_seed, name, 0), moving, estimator,
                    duration_s=planar,
                )
            )
    return configs
