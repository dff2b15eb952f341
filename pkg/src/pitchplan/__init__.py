"""Turn-aware path planning (DAVG) and collision-free MPC tracking for omnidirectional robots."""

__version__ = "0.1.0"

from .cfmpc import Controller, MpcConfig, MpcSolution, solve_lmpc, solve_nmpc  # noqa: E402
from .davg import PathResult, PlannerConfig, plan  # noqa: E402
from .dynamics import BodyInput, Pose, step  # noqa: E402
from .obstacles import Obstacle  # noqa: E402
from .trajectory import Trajectory, interpolate  # noqa: E402
from .visibility import UnplannableError  # noqa: E402

__all__ = [
    "Controller", "MpcConfig", "MpcSolution", "solve_lmpc", "solve_nmpc", "PathResult",
    "PlannerConfig", "plan", "BodyInput", "Pose", "step", "Obstacle", "Trajectory", "interpolate",
    "UnplannableError", "__version__",
]
