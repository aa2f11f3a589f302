"""Box-constrained nonlinear solver used by the controller.

Inner loop: projected gradient accelerated by an L-BFGS model of the
fixed-point residual, globalized by a line search on the forward-backward
envelope with fallback to the plain projected-gradient step. Every candidate
is projected onto the box first, so all iterates are feasible with respect
to the input bounds. The gradient step size comes from a two-evaluation
Lipschitz estimate and is halved (with the quasi-Newton memory flushed)
whenever the fallback step fails to decrease the objective.

Outer loop: quadratic penalty on the distance constraints. The penalty
weight only ever increases; the loop stops when the worst violation is
within tolerance or the weight hits its cap.

Problems are duck-typed: anything with ``objective_grad(z, rho)``,
``constraint_violation(z)`` and ``bounds`` works, which is how the oracle
QP instances reuse the solver unchanged.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-6  # on the infinity norm of the fixed-point residual
    max_inner_iterations: int = 500
    lbfgs_memory: int = 10
    penalty_initial: float = 10.0
    penalty_growth: float = 10.0
    penalty_max: float = 1e6
    constraint_tolerance: float = 1e-3  # meters
    max_linesearch: int = 10
    sufficient_decrease: float = 1e-4


@dataclass(frozen=True)
class BoxBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.shape != upper.shape:
            raise ValueError("bound shapes differ")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)


@dataclass
class SolveReport:
    final_cost: float
    gradient_norm: float
    fixed_point_residual: float
    max_violation: float
    inner_iterations: int
    outer_iterations: int
    function_evaluations: int
    penalty_final: float
    wall_time_s: float
    converged: bool
    penalty_history: tuple = field(default_factory=tuple)

    def deterministic_fields(self) -> tuple:
        """Everything except wall time, for reproducibility comparisons."""
        return (
            self.final_cost,
            self.gradient_norm,
            self.fixed_point_residual,
            self.max_violation,
            self.inner_iterations,
            self.outer_iterations,
            self.function_evaluations,
            self.penalty_final,
            self.converged,
            self.penalty_history,
        )


@dataclass(frozen=True)
class DecisionVector:
    """Stacked input sequences for all chasers: length 6 * n_chasers * horizon."""

    z: np.ndarray
    n_chasers: int
    horizon: int

    def __post_init__(self) -> None:
        z = np.asarray(self.z, dtype=float)
        if z.shape != (6 * self.n_chasers * self.horizon,):
            raise ValueError(
                f"decision vector must have length {6 * self.n_chasers * self.horizon}, "
                f"got shape {z.shape}"
            )
        object.__setattr__(self, "z", z)

    def as_inputs(self) -> np.ndarray:
        """(n_chasers, horizon, 6) view of the flat vector."""
        return self.z.reshape(self.n_chasers, self.horizon, 6)

    @classmethod
    def from_inputs(cls, u: np.ndarray) -> "DecisionVector":
        u = np.asarray(u, dtype=float)
        n_ch, horizon, width = u.shape
        if width != 6:
            raise ValueError("inputs must have trailing dimension 6")
        return cls(u.reshape(-1).copy(), n_ch, horizon)


def project_box(z: np.ndarray, bounds: BoxBounds) -> np.ndarray:
    return np.clip(z, bounds.lower, bounds.upper)


def _lbfgs_direction(r: np.ndarray, mem_s: list, mem_y: list, gamma: float) -> np.ndarray:
    """Two-loop recursion applied to the fixed-point residual.

    With an empty memory this degenerates to the projected-gradient step
    -gamma * r, which keeps the very first candidates sensibly scaled.
    """
    if not mem_s:
        return -gamma * r
    q = r.copy()
    count = len(mem_s)
    rhos = [1.0 / (s @ y) for s, y in zip(mem_s, mem_y)]
    alphas = [0.0] * count
    for i in range(count - 1, -1, -1):
        alphas[i] = rhos[i] * (mem_s[i] @ q)
        q -= alphas[i] * mem_y[i]
    s_last, y_last = mem_s[-1], mem_y[-1]
    q *= (s_last @ y_last) / (y_last @ y_last)
    for i in range(count):
        beta = rhos[i] * (mem_y[i] @ q)
        q += (alphas[i] - beta) * mem_s[i]
    return -q


def _panoc(eval_fn, bounds: BoxBounds, z0: np.ndarray, cfg: SolverConfig, trace=None,
           trace_tag=0):
    z = project_box(np.asarray(z0, dtype=float), bounds)
    phi, grad = eval_fn(z)
    evals = 1

    # two-evaluation Lipschitz estimate along the projected descent direction
    # (the probe must stay inside the box like every other evaluated point)
    gnorm = float(np.linalg.norm(grad))
    delta = 1e-6 * max(1.0, float(np.linalg.norm(z)))
    lip = 1.0
    if gnorm > 1e-16:
        z_probe = project_box(z - delta * grad / gnorm, bounds)
        dist = float(np.linalg.norm(z_probe - z))
        if dist > 1e-16:
            _, grad_probe = eval_fn(z_probe)
            evals += 1
            lip = float(np.linalg.norm(grad_probe - grad)) / dist
    gamma = 0.95 / max(lip, 1e-9)

    mem_s: list = []
    mem_y: list = []
    converged = False
    rnorm = np.inf
    iters = 0
    while iters < cfg.max_inner_iterations:
        iters += 1
        zbar = project_box(z - gamma * grad, bounds)
        step = zbar - z
        r = -step / gamma
        rnorm = float(np.max(np.abs(r)))
        if trace is not None:
            trace.append((trace_tag, iters, phi, rnorm, gamma))
        if rnorm <= cfg.tolerance:
            converged = True
            break
        r2 = float(r @ r)
        fbe = phi + float(grad @ step) + r2 * gamma / 2.0

        direction = _lbfgs_direction(r, mem_s, mem_y, gamma)
        accepted = False
        tau = 1.0
        for _ in range(cfg.max_linesearch):
            z_new = project_box(z + (1.0 - tau) * step + tau * direction, bounds)
            phi_new, grad_new = eval_fn(z_new)
            evals += 1
            zbar_new = project_box(z_new - gamma * grad_new, bounds)
            step_new = zbar_new - z_new
            fbe_new = phi_new + float(grad_new @ step_new) + float(step_new @ step_new) / (2.0 * gamma)
            if (
                np.isfinite(phi_new)
                and fbe_new <= fbe - cfg.sufficient_decrease * gamma * r2
                and phi_new <= phi + 1e-12 * (1.0 + abs(phi))
            ):
                s_vec = z_new - z
                y_vec = (-step_new / gamma) - r
                sy = float(s_vec @ y_vec)
                if sy > 1e-12 * float(np.linalg.norm(s_vec)) * float(np.linalg.norm(y_vec)):
                    mem_s.append(s_vec)
                    mem_y.append(y_vec)
                    if len(mem_s) > cfg.lbfgs_memory:
                        mem_s.pop(0)
                        mem_y.pop(0)
                z, phi, grad = z_new, phi_new, grad_new
                accepted = True
                break
            tau *= 0.5
        if not accepted:
            # plain projected-gradient fallback
            phi_bar, grad_bar = eval_fn(zbar)
            evals += 1
            if np.isfinite(phi_bar) and phi_bar <= phi + 1e-12 * (1.0 + abs(phi)):
                z, phi, grad = zbar, phi_bar, grad_bar
            else:
                # step size was too optimistic: shrink and flush the memory
                gamma *= 0.5
                mem_s.clear()
                mem_y.clear()
                if gamma < 1e-14:
                    break
    return z, phi, grad, rnorm, iters, evals, converged


def solve(problem, z0: np.ndarray, cfg: SolverConfig | None = None, trace=None):
    """Minimize the problem objective over its box, penalizing its constraints.

    Returns (z, SolveReport). The problem must expose ``objective_grad(z, rho)``
    returning (value, gradient), ``constraint_violation(z)`` in meters, and a
    ``bounds`` BoxBounds attribute.
    """
    if cfg is None:
        cfg = SolverConfig()
    t_start = time.perf_counter()
    bounds = problem.bounds
    z = project_box(np.asarray(z0, dtype=float), bounds)
    rho = cfg.penalty_initial
    total_inner = 0
    total_evals = 0
    outer = 0
    rho_history = []
    phi = np.nan
    grad = np.zeros_like(z)
    rnorm = np.inf
    inner_converged = False
    while True:
        outer += 1
        rho_history.append(rho)

        def eval_fn(zz, _rho=rho):
            return problem.objective_grad(zz, _rho)

        z, phi, grad, rnorm, iters, evals, inner_converged = _panoc(
            eval_fn, bounds, z, cfg, trace=trace, trace_tag=outer
        )
        total_inner += iters
        total_evals += evals
        violation = float(problem.constraint_violation(z))
        if violation <= cfg.constraint_tolerance or rho >= cfg.penalty_max:
            break
        rho = min(rho * cfg.penalty_growth, cfg.penalty_max)
    report = SolveReport(
        final_cost=float(phi),
        gradient_norm=float(np.max(np.abs(grad))),
        fixed_point_residual=float(rnorm),
        max_violation=violation,
        inner_iterations=total_inner,
        outer_iterations=outer,
        function_evaluations=total_evals,
        penalty_final=rho,
        wall_time_s=time.perf_counter() - t_start,
        converged=bool(inner_converged and violation <= cfg.constraint_tolerance),
        penalty_history=tuple(rho_history),
    )
    return z, report
