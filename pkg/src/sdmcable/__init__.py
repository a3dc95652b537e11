"""Link budgets and design trade-offs for power-limited SDM submarine cables."""

__version__ = "0.1.0"

from .cable import CableBaseline, PowerFeedSpec, calibrate_feed, design_sweep
from .capacity import DistributionQuery, required_snr_m, required_snr_m_approx, shannon_capacity
from .optimizer import optimize_launch_power, solve_span_for_target
from .photonic import AmplifierSpec, FiberSpec, LinkConfig, LinkGeometry, WdmGrid, evaluate_gsnr
from .rates import best_rate_plan

__all__ = [
    "__version__",
    "AmplifierSpec",
    "CableBaseline",
    "DistributionQuery",
    "FiberSpec",
    "LinkConfig",
    "LinkGeometry",
    "PowerFeedSpec",
    "WdmGrid",
    "best_rate_plan",
    "calibrate_feed",
    "design_sweep",
    "evaluate_gsnr",
    "optimize_launch_power",
    "required_snr_m",
    "required_snr_m_approx",
    "shannon_capacity",
    "solve_span_for_target",
]
