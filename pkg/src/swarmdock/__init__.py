"""Multi-agent spacecraft tracking and docking simulator.

Chasers observe a tumbling target through synthetic monocular cameras, fuse
their marker-based pose estimates, and track docking reference slots with a
centralized nonlinear MPC solved by a projected-gradient method with exact
adjoint gradients.
"""

from .allocation import AllocationResult, PwmCommand, ThrusterLayout, allocate, to_pwm
from .backend import NUMBA_ENABLED, backend_name
from .dynamics import InertialParams, RigidState, Wrench
from .estimation import CombinerConfig, EstimateCombiner, TargetOdometry
from .harness import (
    MetricsSummary,
    RunLog,
    compute_metrics,
    run,
    scenario_suite,
    write_run_outputs,
)
from .nmpc import DockCommand, FormationOffset, HorizonPlan, NmpcConfig, NmpcController, reference_pose
from .scenario import (
    ChaserSetup,
    ScenarioConfig,
    ScenarioEvent,
    VisionSettings,
    load_scenario,
    save_scenario,
)
from .solver import BoxBounds, SolveReport, SolverConfig, solve
from .vision import CameraIntrinsics, MarkerLayout, PoseEstimate, observe, solve_pnp

__version__ = "0.1.0"

__all__ = [
    "AllocationResult",
    "BoxBounds",
    "CameraIntrinsics",
    "ChaserSetup",
    "CombinerConfig",
    "DockCommand",
    "EstimateCombiner",
    "FormationOffset",
    "HorizonPlan",
    "InertialParams",
    "MarkerLayout",
    "MetricsSummary",
    "NUMBA_ENABLED",
    "NmpcConfig",
    "NmpcController",
    "PoseEstimate",
    "PwmCommand",
    "RigidState",
    "RunLog",
    "ScenarioConfig",
    "ScenarioEvent",
    "SolveReport",
    "SolverConfig",
    "TargetOdometry",
    "ThrusterLayout",
    "VisionSettings",
    "Wrench",
    "allocate",
    "backend_name",
    "compute_metrics",
    "load_scenario",
    "observe",
    "reference_pose",
    "run",
    "save_scenario",
    "scenario_suite",
    "solve",
    "solve_pnp",
    "to_pwm",
    "write_run_outputs",
    "__version__",
]
