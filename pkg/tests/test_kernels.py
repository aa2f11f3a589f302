"""The jitted rollout/cost/gradient kernels against slower reference routes."""

import os
import subprocess
import sys

import numpy as np

from swarmdock import kernels, oracles
from swarmdock.dynamics import InertialParams, RigidState, Wrench, chaser_derivative, euler_step


def _instance(seed, n_ch=2, horizon=6):
    rng = np.random.default_rng(seed)
    inst = oracles.random_gradient_instance(rng)
    return inst


def test_rollout_matches_euler_step_reference():
    # the scalar kernel and the readable dynamics module must agree exactly
    rng = np.random.default_rng(0)
    inst = oracles.random_gradient_instance(rng)
    xs = kernels.rollout(
        inst["x0"], inst["u"], inst["dt"], inst["mass"], inst["inertia"], inst["inv_inertia"]
    )
    n_ch, horizon = inst["u"].shape[0], inst["u"].shape[1]
    for n in range(n_ch):
        params = InertialParams(inst["mass"][n], inst["inertia"][n])
        state = RigidState.from_vector(inst["x0"][n])
        for j in range(horizon):
            state = euler_step(
                state, chaser_derivative(state, Wrench.from_vector(inst["u"][n, j]), params),
                inst["dt"],
            )
            assert np.allclose(xs[n, j + 1], state.as_vector(), atol=1e-12), (n, j)


def test_objective_and_grad_agree_on_value():
    inst = _instance(1)
    args = oracles._kernel_args(inst)
    phi_a, track_a, pen_a, viol_a, xs_a = kernels.objective(*args)
    phi_b, track_b, pen_b, viol_b, xs_b, grad = kernels.objective_grad(*args)
    assert phi_a == phi_b
    assert track_a == track_b
    assert pen_a == pen_b
    assert viol_a == viol_b
    assert np.array_equal(xs_a, xs_b)
    assert grad.shape == inst["u"].shape


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(42)
    for _ in range(4):
        inst = oracles.random_gradient_instance(rng)
        grad = kernels.objective_grad(*oracles._kernel_args(inst))[5]
        fd = oracles.finite_difference_gradient(inst)
        rel = np.abs(grad - fd) / np.maximum(1.0, np.abs(fd))
        assert rel.max() < 1e-5


def test_gradient_zero_at_exact_tracking():
    # start on the reference with zero rates and zero weights on inputs:
    # perfect tracking of a static reference needs no force, so the gradient
    # of the pure tracking cost at u=0 vanishes
    horizon = 5
    x0 = np.zeros((1, 13))
    x0[0, 3] = 1.0
    u = np.zeros((1, horizon, 6))
    p_ref = np.zeros((1, horizon + 1, 3))
    q_ref = np.zeros((1, horizon + 1, 4))
    q_ref[:, :, 0] = 1.0
    target_p = np.tile(np.array([10.0, 0.0, 0.0]), (horizon + 1, 1))  # far away
    phi, track, pen, viol, xs, grad = kernels.objective_grad(
        x0, u, 0.1, np.ones(1), np.eye(3)[None], np.eye(3)[None], p_ref, q_ref,
        target_p, 65.0 * np.eye(3), 35.0 * np.eye(4), np.zeros((6, 6)),
        3250.0 * np.eye(3), 1750.0 * np.eye(4), 0.0, np.zeros(6),
        10.0, 0.35, 3.0, True,
    )
    assert phi == 0.0
    assert viol == 0.0
    assert np.allclose(grad, 0.0, atol=1e-12)


def test_penalty_only_active_inside_keepout():
    horizon = 3
    x0 = np.zeros((2, 13))
    x0[:, 3] = 1.0
    x0[0, 0] = 1.0
    x0[1, 0] = -1.0
    u = np.zeros((2, horizon, 6))
    p_ref = np.tile(x0[:, None, 0:3], (1, horizon + 1, 1))
    q_ref = np.zeros((2, horizon + 1, 4))
    q_ref[:, :, 0] = 1.0
    target_p = np.zeros((horizon + 1, 3))
    base = dict(
        dt=0.1, mass=np.ones(2), inertia=np.tile(np.eye(3), (2, 1, 1)),
        inv_inertia=np.tile(np.eye(3), (2, 1, 1)),
        w_pos=np.zeros((3, 3)), w_att=np.zeros((4, 4)), w_input=np.zeros((6, 6)),
        w_pos_final=np.zeros((3, 3)), w_att_final=np.zeros((4, 4)),
        alpha=0.0, u_ref=np.zeros(6),
    )
    # chasers 1 m from target and 2 m apart, keep-out 0.35 m: no penalty
    phi, track, pen, viol, _ = kernels.objective(
        x0, u, base["dt"], base["mass"], base["inertia"], base["inv_inertia"],
        p_ref, q_ref, target_p, base["w_pos"], base["w_att"], base["w_input"],
        base["w_pos_final"], base["w_att_final"], base["alpha"], base["u_ref"],
        100.0, 0.35, 1e9, True,
    )
    assert pen == 0.0 and viol == 0.0
    # raise keep-out above both distances: penalty counts every horizon sample
    phi, track, pen, viol, _ = kernels.objective(
        x0, u, base["dt"], base["mass"], base["inertia"], base["inv_inertia"],
        p_ref, q_ref, target_p, base["w_pos"], base["w_att"], base["w_input"],
        base["w_pos_final"], base["w_att_final"], base["alpha"], base["u_ref"],
        100.0, 2.5, 1e9, True,
    )
    # per sample: two chaser-target terms (2.5-1)^2 and one pair term (2.5-2)^2;
    # the fixed initial state carries no penalty, so horizon samples count
    per_sample = 100.0 * (2 * 1.5**2 + 0.5**2)
    assert np.isclose(pen, horizon * per_sample)
    assert np.isclose(viol, 1.5)
    # proximity flag off: only the reference-distance ceiling remains
    phi, track, pen, viol, _ = kernels.objective(
        x0, u, base["dt"], base["mass"], base["inertia"], base["inv_inertia"],
        p_ref, q_ref, target_p, base["w_pos"], base["w_att"], base["w_input"],
        base["w_pos_final"], base["w_att_final"], base["alpha"], base["u_ref"],
        100.0, 2.5, 1e9, False,
    )
    assert pen == 0.0 and viol == 0.0


def test_falloff_discounts_late_errors():
    # same tracking error at every sample: larger falloff -> smaller cost
    horizon = 10
    x0 = np.zeros((1, 13))
    x0[0, 3] = 1.0
    u = np.zeros((1, horizon, 6))
    p_ref = np.full((1, horizon + 1, 3), 0.5)
    q_ref = np.zeros((1, horizon + 1, 4))
    q_ref[:, :, 0] = 1.0
    target_p = np.full((horizon + 1, 3), 100.0)
    costs = []
    for alpha in (0.0, 0.3, 0.6):
        phi, track, *_ = kernels.objective(
            x0, u, 0.1, np.ones(1), np.eye(3)[None], np.eye(3)[None], p_ref,
            q_ref, target_p, np.eye(3), np.zeros((4, 4)), np.zeros((6, 6)),
            np.zeros((3, 3)), np.zeros((4, 4)), alpha, np.zeros(6),
            0.0, 0.35, 1e9, True,
        )
        costs.append(track)
    assert costs[0] > costs[1] > costs[2]
    # alpha=0: every sample weighted 1; error is 3*(0.5^2) per sample (v=0 so
    # position error is constant over the horizon)
    assert np.isclose(costs[0], (horizon + 1) * 3 * 0.25)


def test_backends_produce_identical_floats():
    # run the same instance in a subprocess with the numpy backend and compare
    inst = _instance(7)
    args = oracles._kernel_args(inst)
    phi, track, pen, viol, xs, grad = kernels.objective_grad(*args)
    code = (
        "import numpy as np\n"
        "from swarmdock import kernels, oracles, backend\n"
        "assert backend.backend_name() == 'numpy', backend.backend_name()\n"
        "rng = np.random.default_rng(7)\n"
        "inst = oracles.random_gradient_instance(rng)\n"
        "phi, track, pen, viol, xs, grad = kernels.objective_grad(*oracles._kernel_args(inst))\n"
        "print(repr(float(phi)))\n"
        "print(repr(float(grad.sum())))\n"
        "print(repr(float(np.abs(grad).max())))\n"
    )
    env = dict(os.environ, SWARMDOCK_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
    )
    lines = out.stdout.strip().splitlines()
    assert float(lines[0]) == phi
    assert float(lines[1]) == float(grad.sum())
    assert float(lines[2]) == float(np.abs(grad).max())
