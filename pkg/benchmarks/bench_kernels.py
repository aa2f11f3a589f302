"""Timing comparison of the jitted rollout/adjoint kernels vs the pure-numpy path.

The hot loop of the whole simulator is the penalized objective with its exact
gradient (rollout + adjoint sweep), called hundreds of times per control tick
by the solver. Both backends run the same source; the fallback is selected by
SWARMDOCK_NO_NUMBA=1 at import time, so each measurement happens in a child
interpreter.

Usage:
    python3 benchmarks/bench_kernels.py             # compare both backends
    python3 benchmarks/bench_kernels.py --single    # time the current backend
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import statistics
import subprocess
import sys
import time

import numpy as np


def build_workload(chasers: int, steps: int, seed: int = 2718) -> tuple:
    """Deterministic mid-size instance shaped like a four-chaser tick."""
    from swarmdock.oracles import random_gradient_instance, _kernel_args

    rng = np.random.default_rng(seed)
    inst = random_gradient_instance(rng)
    # resize to the requested shape with fresh draws, keeping weights/limits
    inst["x0"] = np.zeros((chasers, 13))
    for n in range(chasers):
        inst["x0"][n, 0:3] = rng.normal(size=3)
        q = rng.normal(size=4)
        inst["x0"][n, 3:7] = q / np.linalg.norm(q)
        inst["x0"][n, 7:10] = 0.1 * rng.normal(size=3)
        inst["x0"][n, 10:13] = 0.2 * rng.normal(size=3)
    inst["u"] = 0.4 * rng.normal(size=(chasers, steps, 6))
    inst["mass"] = rng.uniform(0.5, 4.0, size=chasers)
    inertia = np.zeros((chasers, 3, 3))
    inv_inertia = np.zeros((chasers, 3, 3))
    for n in range(chasers):
        a = rng.normal(size=(3, 3))
        mat = a @ a.T + 2.0 * np.eye(3)
        inertia[n] = mat
        inv_inertia[n] = np.linalg.inv(mat)
    inst["inertia"] = inertia
    inst["inv_inertia"] = inv_inertia
    inst["p_ref"] = rng.normal(size=(chasers, steps + 1, 3))
    q_ref = rng.normal(size=(chasers, steps + 1, 4))
    inst["q_ref"] = q_ref / np.linalg.norm(q_ref, axis=2, keepdims=True)
    inst["target_p"] = rng.normal(size=(steps + 1, 3))
    inst["dt"] = 0.1
    return _kernel_args(inst)


def time_current_backend(chasers: int, steps: int, repeats: int) -> dict:
    from swarmdock import kernels
    from swarmdock.backend import backend_name

    args = build_workload(chasers, steps)
    grad = kernels.objective_grad(*args)[5]  # warm-up covers JIT compilation
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = kernels.objective_grad(*args)
        times.append(time.perf_counter() - t0)
        grad = out[5]
    return {
        "backend": backend_name(),
        "median_us": statistics.median(times) * 1e6,
        "checksum": hashlib.sha256(np.ascontiguousarray(grad).tobytes()).hexdigest(),
    }


def run_child(no_numba: bool, args) -> dict:
    env = dict(os.environ)
    env["SWARMDOCK_NO_NUMBA"] = "1" if no_numba else ""
    cmd = [sys.executable, os.path.abspath(__file__), "--single", "--json",
           "--chasers", str(args.chasers), "--steps", str(args.steps),
           "--repeats", str(args.repeats)]
    out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--single", action="store_true",
                        help="time only the backend active in this interpreter")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("--chasers", type=int, default=4)
    parser.add_argument("--steps", type=int, default=30)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    if args.single:
        result = time_current_backend(args.chasers, args.steps, args.repeats)
        if args.json:
            print(json.dumps(result))
        else:
            print(f"backend={result['backend']:6s} objective+gradient "
                  f"median {result['median_us']:.1f} us "
                  f"(chasers={args.chasers}, steps={args.steps}, repeats={args.repeats})")
        return 0

    fast = run_child(False, args)
    slow = run_child(True, args)
    for r in (fast, slow):
        print(f"backend={r['backend']:6s} objective+gradient median {r['median_us']:8.1f} us "
              f"(chasers={args.chasers}, steps={args.steps}, repeats={args.repeats})")
    identical = fast["checksum"] == slow["checksum"]
    print(f"speedup: {slow['median_us'] / fast['median_us']:.1f}x   "
          f"gradients bit-identical: {'yes' if identical else 'NO'}")
    return 0 if identical else 1


if __name__ == "__main__":
    sys.exit(main())
