"""Scenario configuration: dataclasses plus a versioned YAML file format.

A scenario pins down everything a run needs: the mode (free 6-DoF orbital or
planar air-bearing), durations and rates, the target's initial motion, each
chaser's starting state and formation offset, controller/estimator/solver
settings, camera and marker properties, and a time-ordered event list (dock
commands, reference changes, target velocity changes, estimate corruption).
Every field has a YAML spelling so suites are reproducible from plain files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .dynamics import InertialParams, RigidState
from .estimation import CombinerConfig
from .nmpc import FormationOffset, NmpcConfig
from .quat import IDENTITY_QUAT
from .solver import SolverConfig
from .vision import CameraIntrinsics, MarkerLayout

SCHEMA_VERSION = 1

EVENT_KINDS = (
    "dock",
    "set_offset",
    "set_target_velocity",
    "nudge_target",
    "inject_estimate_outlier",
)


@dataclass(frozen=True)
class ScenarioEvent:
    """One timestamped action applied to the running scenario.

    kind-specific fields:
      dock                    chaser_id, scale (final offset scale), ramp_s
      set_offset              chaser_id, vector (new offset position),
                              quaternion (new offset attitude, optional)
      set_target_velocity     vector (linear), angular (body spin), absolute
      nudge_target            vector/angular added to the target's velocities
      inject_estimate_outlier chaser_id, vector added to that chaser's next
                              world-frame estimate position
    """

    kind: str
    time: float
    chaser_id: int = -1
    vector: np.ndarray | None = None
    angular: np.ndarray | None = None
    quaternion: np.ndarray | None = None
    scale: float = 1.0
    ramp_s: float = 30.0

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.time < 0.0:
            raise ValueError("event time cannot be negative")
        for name in ("vector", "angular"):
            value = getattr(self, name)
            if value is not None:
                arr = np.asarray(value, dtype=float)
                if arr.shape != (3,):
                    raise ValueError(f"event {name} must have shape (3,)")
                object.__setattr__(self, name, arr)
        if self.quaternion is not None:
            q = np.asarray(self.quaternion, dtype=float)
            if q.shape != (4,) or abs(np.linalg.norm(q) - 1.0) > 1e-6:
                raise ValueError("event quaternion must be unit-norm (4,)")
            object.__setattr__(self, "quaternion", q)
        needs_chaser = self.kind in ("dock", "set_offset", "inject_estimate_outlier")
        if needs_chaser and self.chaser_id < 0:
            raise ValueError(f"{self.kind} event needs a chaser_id")
        if self.kind == "dock" and not 0.0 < self.scale <= 1.0:
            raise ValueError("dock scale must lie in (0, 1]")
        if self.kind == "set_offset" and self.vector is None:
            raise ValueError("set_offset event needs a vector")
        if self.kind == "inject_estimate_outlier" and self.vector is None:
            raise ValueError("inject_estimate_outlier event needs a vector")


@dataclass(frozen=True)
class VisionSettings:
    """Camera model, marker cube geometry, and pixel noise level."""

    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    pixel_noise: float = 1.0
    cube_half_size: float = 0.15
    marker_half_size: float = 0.10

    def __post_init__(self) -> None:
        if self.pixel_noise < 0.0:
            raise ValueError("pixel noise cannot be negative")
        if not 0.0 < self.marker_half_size <= self.cube_half_size:
            raise ValueError("need 0 < marker half-size <= cube half-size")

    def marker_layout(self) -> MarkerLayout:
        return MarkerLayout.cube(self.cube_half_size, self.marker_half_size)


@dataclass(frozen=True)
class ChaserSetup:
    initial_state: RigidState
    offset: FormationOffset
    params: InertialParams


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    target: RigidState
    chasers: tuple[ChaserSetup, ...]
    mode: str = "orbital"
    duration_s: float = 120.0
    control_rate_hz: float = 10.0
    physics_substep_s: float = 0.001
    seed: int = 0
    estimator: str = "vision"
    failure_distance_m: float = 5.0
    disturbance_accel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    nmpc: NmpcConfig = field(default_factory=NmpcConfig)
    combiner: CombinerConfig = field(default_factory=CombinerConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    vision: VisionSettings = field(default_factory=VisionSettings)
    events: tuple[ScenarioEvent, ...] = ()
    pwm_period_s: float = 0.1
    pwm_min_on_s: float = 0.01

    def __post_init__(self) -> None:
        if self.mode not in ("orbital", "planar"):
            raise ValueError("mode must be 'orbital' or 'planar'")
        if self.estimator not in ("vision", "ground_truth"):
            raise ValueError("estimator must be 'vision' or 'ground_truth'")
        if self.duration_s < 0.0:
            raise ValueError("duration cannot be negative")
        if self.control_rate_hz <= 0.0 or self.physics_substep_s <= 0.0:
            raise ValueError("rates must be positive")
        period = 1.0 / self.control_rate_hz
        if self.physics_substep_s > period + 1e-12:
            raise ValueError("physics substep cannot exceed the control period")
        if abs(period - self.nmpc.dt) > 1e-9:
            raise ValueError("control period must equal the planning step")
        if not self.chasers:
            raise ValueError("at least one chaser required")
        for ev in self.events:
            if ev.time > self.duration_s:
                raise ValueError("event scheduled after the scenario ends")
            if ev.chaser_id >= len(self.chasers):
                raise ValueError("event addresses an unknown chaser")
        dist = np.asarray(self.disturbance_accel, dtype=float)
        if dist.shape != (3,):
            raise ValueError("disturbance acceleration must have shape (3,)")
        object.__setattr__(self, "disturbance_accel", dist)
        object.__setattr__(self, "chasers", tuple(self.chasers))
        object.__setattr__(self, "events", tuple(sorted(self.events, key=lambda e: e.time)))

    @property
    def ticks(self) -> int:
        return int(round(self.duration_s * self.control_rate_hz))


def _vec(arr) -> list:
    return [float(v) for v in np.asarray(arr).reshape(-1)]


def _state_to_dict(state: RigidState) -> dict:
    return {
        "position": _vec(state.position),
        "quaternion": _vec(state.quaternion),
        "velocity": _vec(state.velocity),
        "angular_velocity": _vec(state.angular_velocity),
    }


def _state_from_dict(d: dict) -> RigidState:
    return RigidState(
        np.array(d.get("position", [0.0, 0.0, 0.0]), dtype=float),
        np.array(d.get("quaternion", IDENTITY_QUAT), dtype=float),
        np.array(d.get("velocity", [0.0, 0.0, 0.0]), dtype=float),
        np.array(d.get("angular_velocity", [0.0, 0.0, 0.0]), dtype=float),
    )


def _weight_to_entry(mat: np.ndarray):
    diag = np.diag(np.diag(mat))
    if np.array_equal(mat, diag):
        d = np.diag(mat)
        if np.all(d == d[0]):
            return float(d[0])
        return _vec(d)
    return [[float(v) for v in row] for row in mat]


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    nm = cfg.nmpc
    return {
        "version": SCHEMA_VERSION,
        "name": cfg.name,
        "mode": cfg.mode,
        "duration_s": float(cfg.duration_s),
        "control_rate_hz": float(cfg.control_rate_hz),
        "physics_substep_s": float(cfg.physics_substep_s),
        "seed": int(cfg.seed),
        "estimator": cfg.estimator,
        "failure_distance_m": float(cfg.failure_distance_m),
        "disturbance_accel": _vec(cfg.disturbance_accel),
        "pwm_period_s": float(cfg.pwm_period_s),
        "pwm_min_on_s": float(cfg.pwm_min_on_s),
        "target": _state_to_dict(cfg.target),
        "chasers": [
            {
                **_state_to_dict(ch.initial_state),
                "offset": {
                    "position": _vec(ch.offset.position),
                    "quaternion": _vec(ch.offset.quaternion),
                    "dock_scale": float(ch.offset.dock_scale),
                },
                "mass": float(ch.params.mass),
                "inertia": [[float(v) for v in row] for row in ch.params.inertia],
            }
            for ch in cfg.chasers
        ],
        "nmpc": {
            "horizon_s": float(nm.horizon_s),
            "dt": float(nm.dt),
            "falloff": float(nm.falloff),
            "position_weight": _weight_to_entry(nm.position_weight),
            "attitude_weight": _weight_to_entry(nm.attitude_weight),
            "input_weight": _weight_to_entry(nm.input_weight),
            "final_position_weight": _weight_to_entry(nm.final_position_weight),
            "final_attitude_weight": _weight_to_entry(nm.final_attitude_weight),
            "force_limit": float(nm.force_limit),
            "torque_limit": float(nm.torque_limit),
            "min_distance": float(nm.min_distance),
            "max_reference_distance": float(nm.max_reference_distance),
            "input_reference": _vec(nm.input_reference),
            "proximity_constraints": bool(nm.proximity_constraints),
        },
        "combiner": {
            "window": int(cfg.combiner.window),
            "staleness_s": float(cfg.combiner.staleness_s),
            "position_threshold_m": float(cfg.combiner.position_threshold_m),
            "angle_threshold_rad": float(cfg.combiner.angle_threshold_rad),
        },
        "solver": {
            "tolerance": float(cfg.solver.tolerance),
            "max_inner_iterations": int(cfg.solver.max_inner_iterations),
            "lbfgs_memory": int(cfg.solver.lbfgs_memory),
            "penalty_initial": float(cfg.solver.penalty_initial),
            "penalty_growth": float(cfg.solver.penalty_growth),
            "penalty_max": float(cfg.solver.penalty_max),
            "constraint_tolerance": float(cfg.solver.constraint_tolerance),
            "max_linesearch": int(cfg.solver.max_linesearch),
            "sufficient_decrease": float(cfg.solver.sufficient_decrease),
        },
        "vision": {
            "pixel_noise": float(cfg.vision.pixel_noise),
            "cube_half_size": float(cfg.vision.cube_half_size),
            "marker_half_size": float(cfg.vision.marker_half_size),
            "intrinsics": {
                "fx": float(cfg.vision.intrinsics.fx),
                "fy": float(cfg.vision.intrinsics.fy),
                "cx": float(cfg.vision.intrinsics.cx),
                "cy": float(cfg.vision.intrinsics.cy),
                "width": int(cfg.vision.intrinsics.width),
                "height": int(cfg.vision.intrinsics.height),
            },
        },
        "events": [
            {
                "kind": ev.kind,
                "time": float(ev.time),
                **({"chaser_id": int(ev.chaser_id)} if ev.chaser_id >= 0 else {}),
                **({"vector": _vec(ev.vector)} if ev.vector is not None else {}),
                **({"angular": _vec(ev.angular)} if ev.angular is not None else {}),
                **({"quaternion": _vec(ev.quaternion)} if ev.quaternion is not None else {}),
                "scale": float(ev.scale),
                "ramp_s": float(ev.ramp_s),
            }
            for ev in cfg.events
        ],
    }


def scenario_from_dict(data: dict) -> ScenarioConfig:
    version = data.get("version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported scenario version {version!r}")
    nm = data.get("nmpc", {})
    nmpc = NmpcConfig(
        horizon_s=nm.get("horizon_s", 3.0),
        dt=nm.get("dt", 0.1),
        falloff=nm.get("falloff", 0.0),
        position_weight=nm.get("position_weight", 65.0),
        attitude_weight=nm.get("attitude_weight", 35.0),
        input_weight=nm.get("input_weight", [3.5, 3.5, 3.5, 40.0, 40.0, 40.0]),
        final_position_weight=nm.get("final_position_weight", 3250.0),
        final_attitude_weight=nm.get("final_attitude_weight", 1750.0),
        force_limit=nm.get("force_limit", 2.0),
        torque_limit=nm.get("torque_limit", 0.5),
        min_distance=nm.get("min_distance", 0.35),
        max_reference_distance=nm.get("max_reference_distance", 3.0),
        input_reference=np.array(nm.get("input_reference", [0.0] * 6), dtype=float),
        proximity_constraints=nm.get("proximity_constraints", True),
    )
    cb = data.get("combiner", {})
    combiner = CombinerConfig(
        window=cb.get("window", 10),
        staleness_s=cb.get("staleness_s", 0.5),
        position_threshold_m=cb.get("position_threshold_m", 0.25),
        angle_threshold_rad=cb.get("angle_threshold_rad", 0.5),
    )
    sv = data.get("solver", {})
    solver = SolverConfig(
        tolerance=sv.get("tolerance", 1e-6),
        max_inner_iterations=sv.get("max_inner_iterations", 500),
        lbfgs_memory=sv.get("lbfgs_memory", 10),
        penalty_initial=sv.get("penalty_initial", 10.0),
        penalty_growth=sv.get("penalty_growth", 10.0),
        penalty_max=sv.get("penalty_max", 1e6),
        constraint_tolerance=sv.get("constraint_tolerance", 1e-3),
        max_linesearch=sv.get("max_linesearch", 10),
        sufficient_decrease=sv.get("sufficient_decrease", 1e-4),
    )
    vs = data.get("vision", {})
    intr = vs.get("intrinsics", {})
    vision = VisionSettings(
        intrinsics=CameraIntrinsics(
            fx=intr.get("fx", 600.0),
            fy=intr.get("fy", 600.0),
            cx=intr.get("cx", 320.0),
            cy=intr.get("cy", 240.0),
            width=intr.get("width", 640),
            height=intr.get("height", 480),
        ),
        pixel_noise=vs.get("pixel_noise", 1.0),
        cube_half_size=vs.get("cube_half_size", 0.15),
        marker_half_size=vs.get("marker_half_size", 0.10),
    )
    chasers = []
    for ch in data.get("chasers", []):
        off = ch.get("offset", {})
        chasers.append(
            ChaserSetup(
                initial_state=_state_from_dict(ch),
                offset=FormationOffset(
                    position=np.array(off.get("position", [-1.5, 0.0, 0.0]), dtype=float),
                    quaternion=np.array(off.get("quaternion", IDENTITY_QUAT), dtype=float),
                    dock_scale=off.get("dock_scale", 1.0),
                ),
                params=InertialParams(
                    mass=ch.get("mass", 1.0),
                    inertia=np.array(ch.get("inertia", np.eye(3).tolist()), dtype=float),
                ),
            )
        )
    events = []
    for ev in data.get("events", []):
        events.append(
            ScenarioEvent(
                kind=ev["kind"],
                time=ev["time"],
                chaser_id=ev.get("chaser_id", -1),
                vector=np.array(ev["vector"], dtype=float) if "vector" in ev else None,
                angular=np.array(ev["angular"], dtype=float) if "angular" in ev else None,
                quaternion=np.array(ev["quaternion"], dtype=float) if "quaternion" in ev else None,
                scale=ev.get("scale", 1.0),
                ramp_s=ev.get("ramp_s", 30.0),
            )
        )
    return ScenarioConfig(
        name=data.get("name", "unnamed"),
        target=_state_from_dict(data.get("target", {})),
        chasers=tuple(chasers),
        mode=data.get("mode", "orbital"),
        duration_s=data.get("duration_s", 120.0),
        control_rate_hz=data.get("control_rate_hz", 10.0),
        physics_substep_s=data.get("physics_substep_s", 0.001),
        seed=data.get("seed", 0),
        estimator=data.get("estimator", "vision"),
        failure_distance_m=data.get("failure_distance_m", 5.0),
        disturbance_accel=np.array(data.get("disturbance_accel", [0.0] * 3), dtype=float),
        nmpc=nmpc,
        combiner=combiner,
        solver=solver,
        vision=vision,
        events=tuple(events),
        pwm_period_s=data.get("pwm_period_s", 0.1),
        pwm_min_on_s=data.get("pwm_min_on_s", 0.01),
    )


def save_scenario(cfg: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(scenario_to_dict(cfg), fh, sort_keys=False)


def load_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError("scenario file must contain a mapping")
    return scenario_from_dict(data)
