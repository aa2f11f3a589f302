import numpy as np
import pytest

from swarmdock import kernels
from swarmdock.dynamics import (
    InertialParams,
    RigidState,
    SLIDER_FORCE_LIMIT,
    SLIDER_TORQUE_LIMIT,
    Wrench,
    chaser_derivative,
    euler_step,
    target_derivative,
)
from swarmdock.nmpc import (
    DockCommand,
    FormationOffset,
    HorizonPlan,
    NmpcConfig,
    NmpcController,
    build_references,
    docking_schedule,
    evaluate_constraints,
    evaluate_cost,
    input_bounds,
    reference_pose,
    rollout_target,
)
from swarmdock.quat import (
    IDENTITY_QUAT,
    PoseSE3,
    quat_error,
    quat_from_axis_angle,
    quat_multiply,
    quat_normalize,
    quat_to_angle,
)
from swarmdock.solver import SolverConfig


def _unit_params():
    return InertialParams(mass=1.0, inertia=np.eye(3))


def _state(p, q=None, v=None, w=None):
    return RigidState(
        np.asarray(p, dtype=float),
        IDENTITY_QUAT if q is None else q,
        np.zeros(3) if v is None else np.asarray(v, dtype=float),
        np.zeros(3) if w is None else np.asarray(w, dtype=float),
    )


def test_reference_pose_identity_attitude():
    target = _state([2.0, 1.0, -0.5])
    off = FormationOffset(position=np.array([-1.0, 0.0, 0.0]))
    p_ref, q_ref = reference_pose(target, off)
    assert np.allclose(p_ref, [1.0, 1.0, -0.5])
    assert np.allclose(q_ref, IDENTITY_QUAT)


def test_reference_pose_rotated_target():
    q = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), np.pi / 2)
    target = _state([0.0, 0.0, 0.0], q=q)
    off = FormationOffset(position=np.array([-1.0, 0.0, 0.0]))
    p_ref, _ = reference_pose(target, off)
    assert np.allclose(p_ref, [0.0, -1.0, 0.0], atol=1e-12)


def test_reference_pose_dock_scale_distance():
    rng = np.random.default_rng(5)
    for _ in range(10):
        q = quat_normalize(rng.normal(size=4))
        target = _state(rng.normal(size=3), q=q)
        direction = rng.normal(size=3)
        off = FormationOffset(position=direction / np.linalg.norm(direction))
        p_ref, _ = reference_pose(target, off, scale=0.2)
        assert abs(np.linalg.norm(p_ref - target.position) - 0.2) < 1e-12


def test_reference_pose_equivariance_under_global_transform():
    rng = np.random.default_rng(8)
    for _ in range(10):
        target = _state(rng.normal(size=3), q=quat_normalize(rng.normal(size=4)))
        off = FormationOffset(position=rng.normal(size=3))
        world_shift = PoseSE3(quat_normalize(rng.normal(size=4)), rng.normal(size=3))
        p_ref, q_ref = reference_pose(target, off)
        moved = _state(
            world_shift.apply(target.position),
            quat_multiply(world_shift.quaternion, target.quaternion),
        )
        p_ref2, q_ref2 = reference_pose(moved, off)
        assert np.allclose(p_ref2, world_shift.apply(p_ref), atol=1e-12)
        expected_q = quat_multiply(world_shift.quaternion, q_ref)
        assert min(np.linalg.norm(q_ref2 - expected_q), np.linalg.norm(q_ref2 + expected_q)) < 1e-12


def test_rollout_target_static():
    states = rollout_target(_state([1.0, 2.0, 3.0]), 30, 0.1)
    assert states.shape == (31, 13)
    assert np.allclose(states, states[0])


def test_rollout_target_constant_velocity_displacement():
    v = np.array([0.015, 0.0075, 0.03])
    states = rollout_target(_state([0.0, 0.0, 0.0], v=v), 30, 0.1)
    assert np.allclose(states[-1, :3], v * 3.0, atol=1e-12)


def test_rollout_target_spin_only():
    w = np.array([0.0, 0.0, 0.2])
    states = rollout_target(_state([0.5, 0.0, 0.0], w=w), 20, 0.1)
    assert np.allclose(states[:, :3], states[0, :3])
    angle = quat_to_angle(quat_error(states[-1, 3:7], states[0, 3:7]))
    assert angle > 0.3


def test_cost_zero_on_reference():
    cfg = NmpcConfig()
    target = _state([0.0, 0.0, 0.0])
    off = FormationOffset(position=np.array([-1.3, 0.0, 0.0]))
    p_ref, q_ref, _ = build_references(target, [off], np.ones(1), cfg.steps, cfg.dt)
    states = np.zeros((1, cfg.steps + 1, 13))
    states[:, :, :3] = p_ref
    states[:, :, 3:7] = q_ref
    inputs = np.zeros((1, cfg.steps, 6))
    assert evaluate_cost(states, inputs, p_ref, q_ref, cfg) == 0.0


def test_cost_single_stage_position_error():
    cfg = NmpcConfig(
        horizon_s=0.1,
        dt=0.1,
        attitude_weight=np.zeros((4, 4)),
        input_weight=np.zeros((6, 6)),
        final_position_weight=np.zeros((3, 3)),
        final_attitude_weight=np.zeros((4, 4)),
    )
    states = np.zeros((1, 2, 13))
    states[:, :, 3] = 1.0
    states[0, 0, 0] = 1.0
    p_ref = np.zeros((1, 2, 3))
    q_ref = np.zeros((1, 2, 4))
    q_ref[:, :, 0] = 1.0
    inputs = np.zeros((1, 1, 6))
    assert abs(evaluate_cost(states, inputs, p_ref, q_ref, cfg) - 65.0) < 1e-12


def test_cost_linear_in_weights():
    rng = np.random.default_rng(12)
    cfg = NmpcConfig(horizon_s=0.5, dt=0.1)
    doubled = NmpcConfig(
        horizon_s=0.5,
        dt=0.1,
        position_weight=2 * cfg.position_weight,
        attitude_weight=2 * cfg.attitude_weight,
        input_weight=2 * cfg.input_weight,
        final_position_weight=2 * cfg.final_position_weight,
        final_attitude_weight=2 * cfg.final_attitude_weight,
    )
    states = rng.normal(size=(2, 6, 13))
    for n in range(2):
        for j in range(6):
            states[n, j, 3:7] = quat_normalize(states[n, j, 3:7])
    inputs = rng.normal(size=(2, 5, 6))
    p_ref = rng.normal(size=(2, 6, 3))
    q_ref = np.zeros((2, 6, 4))
    for n in range(2):
        for j in range(6):
            q_ref[n, j] = quat_normalize(rng.normal(size=4))
    j1 = evaluate_cost(states, inputs, p_ref, q_ref, cfg)
    j2 = evaluate_cost(states, inputs, p_ref, q_ref, doubled)
    assert abs(j2 - 2 * j1) < 1e-9 * max(1.0, abs(j1))
    assert j1 > 0.0


def test_cost_matches_kernel():
    rng = np.random.default_rng(42)
    for _ in range(5):
        n_ch = int(rng.integers(1, 4))
        cfg = NmpcConfig(horizon_s=0.8, dt=0.1, falloff=float(rng.uniform(0.0, 0.6)))
        steps = cfg.steps
        x0 = np.zeros((n_ch, 13))
        x0[:, :3] = rng.normal(scale=1.0, size=(n_ch, 3))
        for n in range(n_ch):
            x0[n, 3:7] = quat_normalize(rng.normal(size=4))
        x0[:, 7:10] = rng.normal(scale=0.2, size=(n_ch, 3))
        x0[:, 10:13] = rng.normal(scale=0.2, size=(n_ch, 3))
        u = rng.normal(scale=0.5, size=(n_ch, steps, 6))
        p_ref = rng.normal(size=(n_ch, steps + 1, 3))
        q_ref = np.zeros((n_ch, steps + 1, 4))
        for n in range(n_ch):
            for j in range(steps + 1):
                q_ref[n, j] = quat_normalize(rng.normal(size=4))
        target_p = rng.normal(size=(steps + 1, 3))
        masses = np.ones(n_ch)
        inertias = np.stack([np.eye(3)] * n_ch)
        phi, track, pen, viol, xs = kernels.objective(
            x0, u, cfg.dt, masses, inertias, inertias, p_ref, q_ref, target_p,
            cfg.position_weight, cfg.attitude_weight, cfg.input_weight,
            cfg.final_position_weight, cfg.final_attitude_weight, cfg.falloff,
            cfg.input_reference, 0.0, cfg.min_distance,
            cfg.max_reference_distance, True,
        )
        independent = evaluate_cost(xs, u, p_ref, q_ref, cfg)
        assert abs(independent - track) < 1e-9 * max(1.0, abs(track))


def test_constraints_all_satisfied():
    cfg = NmpcConfig(horizon_s=0.3, dt=0.1)
    steps = cfg.steps
    states = np.zeros((2, steps + 1, 13))
    states[0, :, 0] = 1.3
    states[1, :, 0] = -1.3
    states[:, :, 3] = 1.0
    target_states = np.zeros((steps + 1, 13))
    target_states[:, 3] = 1.0
    p_ref = np.zeros((2, steps + 1, 3))
    p_ref[0, :, 0] = 1.3
    p_ref[1, :, 0] = -1.3
    res = evaluate_constraints(states, p_ref, target_states, cfg)
    assert res.shape[0] == (steps + 1) * (2 + 1 + 2)
    assert np.all(res <= 0.0)


def test_constraints_coincident_chasers():
    cfg = NmpcConfig(horizon_s=0.1, dt=0.1)
    states = np.zeros((2, 2, 13))
    states[:, :, 0] = 1.0
    states[:, :, 3] = 1.0
    target_states = np.zeros((2, 13))
    target_states[:, 3] = 1.0
    p_ref = np.zeros((2, 2, 3))
    p_ref[:, :, 0] = 1.0
    res = evaluate_constraints(states, p_ref, target_states, cfg)
    assert np.isclose(res.max(), cfg.min_distance)


def test_constraints_symmetric_in_chaser_order():
    rng = np.random.default_rng(3)
    cfg = NmpcConfig(horizon_s=0.4, dt=0.1)
    steps = cfg.steps
    states = rng.normal(size=(3, steps + 1, 13))
    target_states = rng.normal(size=(steps + 1, 13))
    p_ref = rng.normal(size=(3, steps + 1, 3))
    res = evaluate_constraints(states, p_ref, target_states, cfg)
    order = [2, 0, 1]
    res2 = evaluate_constraints(states[order], p_ref[order], target_states, cfg)
    assert np.allclose(np.sort(res), np.sort(res2))


def test_constraints_proximity_off():
    cfg = NmpcConfig(horizon_s=0.2, dt=0.1, proximity_constraints=False)
    states = np.zeros((2, 3, 13))
    states[:, :, 3] = 1.0
    target_states = np.zeros((3, 13))
    p_ref = np.zeros((2, 3, 3))
    res = evaluate_constraints(states, p_ref, target_states, cfg)
    # only the max-distance residuals remain, even with everything coincident
    assert res.shape[0] == 3 * 2
    assert np.all(res <= 0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        NmpcConfig(horizon_s=1.0, dt=0.3)
    with pytest.raises(ValueError):
        NmpcConfig(falloff=1.0)
    with pytest.raises(ValueError):
        NmpcConfig(min_distance=4.0, max_reference_distance=3.0)
    bad = np.eye(3)
    bad[0, 1] = 5.0
    with pytest.raises(ValueError):
        NmpcConfig(position_weight=bad)
    cfg = NmpcConfig(position_weight=65.0, attitude_weight=np.full(4, 35.0))
    assert np.allclose(cfg.position_weight, 65.0 * np.eye(3))
    assert np.allclose(cfg.attitude_weight, 35.0 * np.eye(4))
    assert cfg.steps == 30


def test_offset_validation():
    with pytest.raises(ValueError):
        FormationOffset(position=np.zeros(3), quaternion=np.array([2.0, 0.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        FormationOffset(position=np.zeros(3), dock_scale=0.0)


def test_docking_schedule_defaults_and_ramp():
    assert np.allclose(docking_schedule([], 100.0, 3), np.ones(3))
    cmd = DockCommand(chaser_id=1, start_time=60.0, final_scale=0.3, ramp_s=30.0)
    assert np.allclose(docking_schedule([cmd], 59.9, 3), [1.0, 1.0, 1.0])
    assert np.allclose(docking_schedule([cmd], 60.0, 3), [1.0, 1.0, 1.0])
    assert np.allclose(docking_schedule([cmd], 75.0, 3), [1.0, 0.65, 1.0])
    assert np.allclose(docking_schedule([cmd], 90.0, 3), [1.0, 0.3, 1.0])
    assert np.allclose(docking_schedule([cmd], 500.0, 3), [1.0, 0.3, 1.0])


def test_docking_schedule_override_and_validation():
    cmds = [
        DockCommand(chaser_id=0, start_time=10.0, final_scale=0.5, ramp_s=0.0),
        DockCommand(chaser_id=0, start_time=20.0, final_scale=0.9, ramp_s=0.0),
    ]
    assert np.allclose(docking_schedule(cmds, 15.0, 1), [0.5])
    assert np.allclose(docking_schedule(cmds, 25.0, 1), [0.9])
    with pytest.raises(ValueError):
        docking_schedule([DockCommand(chaser_id=5, start_time=0.0, final_scale=0.5)], 1.0, 2)
    with pytest.raises(ValueError):
        DockCommand(chaser_id=0, start_time=0.0, final_scale=1.5)


def test_controller_equilibrium_zero_command():
    cfg = NmpcConfig()
    off = FormationOffset(position=np.array([-1.3, 0.0, 0.0]))
    controller = NmpcController(cfg, [off], [_unit_params()])
    target = _state([0.0, 0.0, 0.0])
    p_ref, q_ref = reference_pose(target, off)
    chaser = _state(p_ref, q=q_ref)
    plan = controller.step(target, [chaser])
    assert plan.converged
    assert np.linalg.norm(plan.inputs[0, 0]) < 1e-3
    assert plan.cost < 1e-9


def test_controller_pushes_toward_reference():
    cfg = NmpcConfig()
    off = FormationOffset(position=np.array([-1.3, 0.0, 0.0]))
    controller = NmpcController(cfg, [off], [_unit_params()])
    target = _state([0.0, 0.0, 0.0])
    p_ref, q_ref = reference_pose(target, off)
    chaser = _state(p_ref - np.array([1.0, 0.0, 0.0]), q=q_ref)
    plan = controller.step(target, [chaser])
    assert plan.inputs[0, 0, 0] > 0.1
    lo, hi = controller.bounds.lower, controller.bounds.upper
    z = plan.inputs.reshape(-1)
    assert np.all(z >= lo - 1e-12) and np.all(z <= hi + 1e-12)


def test_controller_warm_start_shift():
    cfg = NmpcConfig(horizon_s=1.0, dt=0.1)
    off = FormationOffset(position=np.array([-1.3, 0.0, 0.0]))
    controller = NmpcController(cfg, [off], [_unit_params()])
    target = _state([0.0, 0.0, 0.0])
    chaser = _state([-2.0, 0.3, 0.0])
    plan = controller.step(target, [chaser])
    assert np.array_equal(controller._warm[0, :-1], plan.inputs[0, 1:])
    assert np.array_equal(controller._warm[0, -1], plan.inputs[0, -1])
    controller.reset()
    assert np.all(controller._warm == 0.0)


def test_planar_bounds_pin_out_of_plane_inputs():
    bounds = input_bounds(NmpcConfig(horizon_s=0.2, dt=0.1), 2, planar=True)
    step = bounds.lower.reshape(2, 2, 6)
    step_hi = bounds.upper.reshape(2, 2, 6)
    assert np.all(step[:, :, 2] == 0.0) and np.all(step_hi[:, :, 2] == 0.0)
    assert np.all(step[:, :, 3] == 0.0) and np.all(step_hi[:, :, 4] == 0.0)
    assert np.all(step[:, :, 0] == -2.0) and np.all(step_hi[:, :, 5] == 0.5)


def test_planar_controller_commands_stay_planar():
    cfg = NmpcConfig(
        horizon_s=1.5,
        dt=0.1,
        force_limit=SLIDER_FORCE_LIMIT,
        torque_limit=SLIDER_TORQUE_LIMIT,
        proximity_constraints=False,
    )
    off = FormationOffset(position=np.array([-0.5, 0.0, 0.0]))
    controller = NmpcController(cfg, [off], [InertialParams.slider()], planar=True)
    target = _state([0.0, 0.0, 0.0], w=np.array([0.0, 0.0, 0.05]))
    chaser = _state([-1.2, 0.4, 0.0])
    plan = controller.step(target, [chaser])
    u = plan.inputs
    assert np.all(u[:, :, 2] == 0.0)
    assert np.all(u[:, :, 3] == 0.0) and np.all(u[:, :, 4] == 0.0)
    assert np.all(np.abs(u[:, :, :3]) <= SLIDER_FORCE_LIMIT + 1e-12)
    assert np.all(np.abs(u[:, :, 3:]) <= SLIDER_TORQUE_LIMIT + 1e-12)
    with pytest.raises(ValueError):
        NmpcController(NmpcConfig(), [off], [InertialParams.slider()], planar=True)


def test_closed_loop_converges_to_reference():
    cfg = NmpcConfig(horizon_s=1.5, dt=0.1)
    off = FormationOffset(position=np.array([-1.3, 0.0, 0.0]))
    params = _unit_params()
    controller = NmpcController(
        cfg, [off], [params], solver_cfg=SolverConfig(max_inner_iterations=200)
    )
    target = _state([0.0, 0.0, 0.0], v=np.array([0.01, 0.0, 0.0]))
    chaser = _state([-2.0, 0.5, -0.3])
    initial_err = None
    for k in range(40):
        plan = controller.step(target, [chaser])
        cmd = plan.first_commands()[0]
        for _ in range(10):
            chaser = euler_step(chaser, chaser_derivative(chaser, cmd, params), 0.01)
        target = euler_step(target, target_derivative(target), 0.1)
        p_ref, _ = reference_pose(target, off)
        err = np.linalg.norm(chaser.position - p_ref)
        if initial_err is None:
            initial_err = err
    assert err < 0.1 < initial_err
