"""Multiple intersection exponents of planar random-walk packets.

Simulation (nested-box survival and two-level master/trial schemes) and
estimation (maximum likelihood, regression, two-level closed form).
"""

__version__ = "0.1.0"

from .estimators import EstimateReport, kmin_scan, mle, regression_estimate
from .multilevel import BoxSchedule, SurvivalCounts, build_schedule, run_campaign
from .reference import conjectured_reduction, exact_value, rigorous_interval
from .twolevel import optimal_trial_count, run_twolevel_campaign, two_level_estimate
from .walkers import PacketSpec

__all__ = [
    "BoxSchedule", "EstimateReport", "PacketSpec", "SurvivalCounts", "build_schedule",
    "conjectured_reduction", "exact_value", "kmin_scan", "mle", "optimal_trial_count",
    "regression_estimate", "rigorous_interval", "run_campaign", "run_twolevel_campaign",
    "two_level_estimate",
]
