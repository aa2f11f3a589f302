"""Independent correctness oracles.

Each check here answers "is the fast implementation right?" using a slower
route that shares no code with the thing it checks: central finite
differences for the adjoint gradient, exhaustive active-set enumeration for
the box-constrained solvers, geometric round-trips for the camera solver,
and conservation laws for the integrator. The CLI ``verify`` subcommand and
the acceptance tests both run these.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .dynamics import InertialParams, RigidState
from .quat import quat_error, quat_normalize, quat_to_angle, rotate_vector, quat_conjugate


@dataclass(frozen=True)
class OracleResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{tag} {self.name}: worst {self.worst:.3e} vs tol {self.tolerance:.1e}{extra}"


def _random_unit_quat(rng: np.random.Generator) -> np.ndarray:
    return quat_normalize(rng.normal(size=4))


def random_gradient_instance(rng: np.random.Generator) -> dict:
    """A random penalized-objective instance with active distance terms."""
    n_ch = int(rng.integers(1, 4))
    horizon = int(rng.integers(3, 9))
    x0 = np.zeros((n_ch, 13))
    for n in range(n_ch):
        x0[n, 0:3] = rng.normal(size=3)
        x0[n, 3:7] = _random_unit_quat(rng)
        x0[n, 7:10] = 0.2 * rng.normal(size=3)
        x0[n, 10:13] = 0.4 * rng.normal(size=3)
    u = 0.6 * rng.normal(size=(n_ch, horizon, 6))
    mass = rng.uniform(0.5, 4.0, size=n_ch)
    inertia = np.zeros((n_ch, 3, 3))
    inv_inertia = np.zeros((n_ch, 3, 3))
    for n in range(n_ch):
        a = rng.normal(size=(3, 3))
        mat = a @ a.T + 2.0 * np.eye(3)
        inertia[n] = mat
        inv_inertia[n] = np.linalg.inv(mat)
    p_ref = rng.normal(size=(n_ch, horizon + 1, 3))
    q_ref = np.zeros((n_ch, horizon + 1, 4))
    for n in range(n_ch):
        for j in range(horizon + 1):
            q_ref[n, j] = _random_unit_quat(rng)
    target_p = rng.normal(size=(horizon + 1, 3))
    return {
        "x0": x0,
        "u": u,
        "dt": float(rng.uniform(0.05, 0.25)),
        "mass": mass,
        "inertia": inertia,
        "inv_inertia": inv_inertia,
        "p_ref": p_ref,
        "q_ref": q_ref,
        "target_p": target_p,
        "w_pos": 65.0 * np.eye(3),
        "w_att": 35.0 * np.eye(4),
        "w_input": np.diag([3.5, 3.5, 3.5, 40.0, 40.0, 40.0]),
        "w_pos_final": 3250.0 * np.eye(3),
        "w_att_final": 1750.0 * np.eye(4),
        "alpha": float(rng.uniform(0.0, 0.6)),
        "u_ref": 0.1 * rng.normal(size=6),
        # wide keep-out / tight ceiling so both penalty branches go active
        "rho": float(rng.uniform(5.0, 50.0)),
        "d_min": 1.2,
        "d_max": 2.0,
        "proximity_on": True,
    }


def _kernel_args(inst: dict) -> tuple:
    keys = (
        "x0", "u", "dt", "mass", "inertia", "inv_inertia", "p_ref", "q_ref",
        "target_p", "w_pos", "w_att", "w_input", "w_pos_final", "w_att_final",
        "alpha", "u_ref", "rho", "d_min", "d_max", "proximity_on",
    )
    return tuple(inst[k] for k in keys)


def finite_difference_gradient(inst: dict, step: float = 1e-6) -> np.ndarray:
    """Central differences of the penalized objective w.r.t. every input."""
    args = _kernel_args(inst)
    u = inst["u"]
    fd = np.zeros_like(u)
    for n in range(u.shape[0]):
        for j in range(u.shape[1]):
            for k in range(6):
                up = u.copy()
                up[n, j, k] += step
                um = u.copy()
                um[n, j, k] -= step
                fp = kernels.objective(inst["x0"], up, *args[2:])[0]
                fm = kernels.objective(inst["x0"], um, *args[2:])[0]
                fd[n, j, k] = (fp - fm) / (2.0 * step)
    return fd


def check_gradient(instances: int = 20, seed: int = 2024, tol: float = 1e-5) -> OracleResult:
    """Adjoint gradient vs central finite differences on random instances."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        inst = random_gradient_instance(rng)
        grad = kernels.objective_grad(*_kernel_args(inst))[5]
        fd = finite_difference_gradient(inst)
        rel = np.abs(grad - fd) / np.maximum(1.0, np.abs(fd))
        worst = max(worst, float(rel.max()))
    return OracleResult("gradient-vs-finite-difference", worst <= tol, worst, tol,
                        f"{instances} random instances")


def check_pnp_round_trip(poses: int = 50, seed: int = 31, tol_pos: float = 1e-6,
                         tol_rot: float = 1e-6) -> OracleResult:
    """Noiseless render -> solve must reproduce the exact target pose."""
    from .vision import CameraIntrinsics, MarkerLayout, camera_pose, estimate_to_world, observe, solve_pnp

    rng = np.random.default_rng(seed)
    intr = CameraIntrinsics()
    layout = MarkerLayout.cube()
    chaser = RigidState(position=np.array([-1.5, 0.0, 0.0]))
    cam = camera_pose(chaser)
    worst = 0.0
    solved = 0
    attempts = 0
    while solved < poses and attempts < poses * 4:
        attempts += 1
        target = RigidState(
            position=0.3 * rng.normal(size=3),
            quaternion=_random_unit_quat(rng),
        )
        obs = observe(intr, cam, target, layout, 0.0, rng)
        est = solve_pnp(intr, obs, layout)
        if est is None or not est.converged:
            continue
        world = estimate_to_world(est, cam)
        pos_err = float(np.linalg.norm(world.pose.position - target.position))
        rot_err = quat_to_angle(quat_error(world.pose.quaternion, target.quaternion))
        worst = max(worst, pos_err, rot_err)
        solved += 1
    passed = solved >= poses and worst <= min(tol_pos, tol_rot)
    detail = f"{solved} poses solved in {attempts} attempts"
    return OracleResult("pnp-round-trip", passed, worst, min(tol_pos, tol_rot), detail)


@dataclass(frozen=True)
class QuadraticBoxProblem:
    """Convex QP over a box: 0.5 z'Hz + g'z, a linear-dynamics stand-in.

    Duck-types the solver's problem interface; the penalty weight is unused
    because the box is the only constraint.
    """

    hessian: np.ndarray
    linear: np.ndarray
    bounds: "object"

    def objective_grad(self, z: np.ndarray, rho: float):
        hz = self.hessian @ z
        return float(0.5 * z @ hz + self.linear @ z), hz + self.linear

    def constraint_violation(self, z: np.ndarray) -> float:
        return 0.0


def enumerate_box_qp(hessian: np.ndarray, linear: np.ndarray, lower: np.ndarray,
                     upper: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Exact box-QP solution by trying every active-set pattern.

    Each coordinate is free, at its lower bound, or at its upper bound; for a
    strictly convex problem exactly one pattern satisfies the KKT conditions.
    Exponential in the dimension, fine as an oracle for small instances.
    """
    import itertools

    n = hessian.shape[0]
    best = None
    for pattern in itertools.product((0, 1, 2), repeat=n):
        free = [i for i, p in enumerate(pattern) if p == 0]
        z = np.where(np.asarray(pattern) == 1, lower, upper).astype(float)
        if free:
            fixed = [i for i in range(n) if pattern[i] != 0]
            rhs = -(linear[free] + (hessian[np.ix_(free, fixed)] @ z[fixed] if fixed else 0.0))
            try:
                z_free = np.linalg.solve(hessian[np.ix_(free, free)], rhs)
            except np.linalg.LinAlgError:
                continue
            z[free] = z_free
            if np.any(z_free < lower[free] - tol) or np.any(z_free > upper[free] + tol):
                continue
        grad = hessian @ z + linear
        ok = True
        for i, p in enumerate(pattern):
            if p == 1 and grad[i] < -tol:
                ok = False
                break
            if p == 2 and grad[i] > tol:
                ok = False
                break
            if p == 0 and abs(grad[i]) > 1e-6:
                ok = False
                break
        if ok:
            best = z
            break
    if best is None:
        raise RuntimeError("no KKT pattern found; QP oracle instance ill-posed")
    return best


def random_box_qp(rng: np.random.Generator, dim: int):
    a = rng.normal(size=(dim, dim))
    hessian = a @ a.T + 0.5 * np.eye(dim)
    linear = rng.normal(size=dim) * 2.0
    center = rng.normal(size=dim)
    half = rng.uniform(0.1, 1.5, size=dim)
    return hessian, linear, center - half, center + half


def check_qp_solver(instances: int = 20, seed: int = 77, tol: float = 1e-6) -> OracleResult:
    """Native solver vs exhaustive enumeration on random convex box QPs."""
    from .solver import BoxBounds, SolverConfig, solve

    rng = np.random.default_rng(seed)
    cfg = SolverConfig(tolerance=1e-10, max_inner_iterations=2000)
    worst = 0.0
    for k in range(instances):
        dim = int(rng.integers(3, 7))
        hessian, linear, lower, upper = random_box_qp(rng, dim)
        exact = enumerate_box_qp(hessian, linear, lower, upper)
        problem = QuadraticBoxProblem(hessian, linear, BoxBounds(lower, upper))
        z0 = np.zeros(dim)
        z, report = solve(problem, z0, cfg)
        worst = max(worst, float(np.max(np.abs(z - exact))))
    return OracleResult("solver-vs-qp-enumeration", worst <= tol, worst, tol,
                        f"{instances} random box QPs")


def check_angular_momentum(duration: float = 10.0, dt: float = 1e-4,
                           seed: int = 5, tol: float = 1e-3) -> OracleResult:
    """Torque-free tumble must conserve world-frame angular momentum."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 3))
    inertia = a @ a.T + 2.0 * np.eye(3)
    params = InertialParams(rng.uniform(0.5, 3.0), inertia)
    state = RigidState(
        np.zeros(3), _random_unit_quat(rng), rng.normal(size=3), 0.4 * rng.normal(size=3)
    )
    steps = int(round(duration / dt))
    x0 = state.as_vector()[None, :]
    u = np.zeros((1, steps, 6))
    xs = kernels.rollout(
        x0, u, dt, np.array([params.mass]), inertia[None, :, :],
        params.inertia_inverse[None, :, :],
    )

    def momentum(x):
        return rotate_vector(quat_conjugate(x[3:7]), inertia @ x[10:13])

    l0 = momentum(xs[0, 0])
    worst = 0.0
    for j in range(0, steps + 1, max(1, steps // 100)):
        drift = np.linalg.norm(momentum(xs[0, j]) - l0) / np.linalg.norm(l0)
        worst = max(worst, float(drift))
    return OracleResult("angular-momentum-conservation", worst <= tol, worst, tol,
                        f"{duration:.0f} s at dt={dt:g}")


def enumerate_allocation(b: np.ndarray, wrench: np.ndarray, tmax: np.ndarray):
    """Exact minimum-effort thrust split by trying every clip pattern.

    Each thruster is pinned at 0, pinned at its limit, or free; the free
    block takes the minimum-norm solution of the remaining equality. Every
    feasible candidate is an upper bound on the optimum and the optimal
    pattern's candidate attains it, so the feasible minimum is exact.
    Returns None when no pattern is feasible (unattainable wrench).
    """
    n = b.shape[1]
    pinvs = {}
    best = None
    best_effort = np.inf
    for code in range(3 ** n):
        digits = np.empty(n, dtype=np.int64)
        c = code
        for i in range(n):
            digits[i] = c % 3
            c //= 3
        free = digits == 0
        at_max = digits == 2
        residual = wrench - b[:, at_max] @ tmax[at_max]
        t = np.zeros(n)
        t[at_max] = tmax[at_max]
        if free.any():
            key = free.tobytes()
            if key not in pinvs:
                pinvs[key] = np.linalg.pinv(b[:, free])
            t[free] = pinvs[key] @ residual
        if np.max(np.abs(b @ t - wrench)) > 1e-9:
            continue
        if np.any(t < -1e-12) or np.any(t > tmax + 1e-12):
            continue
        effort = float(t @ t)
        if effort < best_effort:
            best_effort = effort
            best = np.clip(t, 0.0, tmax)
    return best


def check_allocation(instances: int = 100, seed: int = 404, tol: float = 1e-6) -> OracleResult:
    """Active thrust allocation against the exhaustive pattern enumeration."""
    from .allocation import ThrusterLayout, allocate

    layout = ThrusterLayout.default_slider()
    b = layout.effectiveness()
    tmax = layout.max_thrusts
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        sample = rng.uniform(0.0, tmax)
        keep = rng.random(layout.count) < 0.7
        sample = sample * keep
        wrench = b @ sample
        result = allocate(wrench, layout)
        reference = enumerate_allocation(b, wrench, tmax)
        gap = float(np.max(np.abs(result.thrusts - reference)))
        exactness = float(np.max(np.abs(b @ result.thrusts - wrench)))
        worst = max(worst, gap, exactness)
        if result.saturated:
            worst = max(worst, 1.0)
    return OracleResult(
        "thrust-allocation", worst <= tol, worst, tol, f"{instances} attainable wrenches"
    )
