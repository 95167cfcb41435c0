"""
UPRE Plugin - unbiased predictive risk estimator, argmin over all sweeps
"""

from typing import Optional

from core.stat_rules import upre_score
from plugins.base_plugin import IterationStats, StoppingRulePlugin


class UPREPlugin(StoppingRulePlugin):
    """U_k = ||b - A x_k||^2 + 2 sigma^2 t_k - sigma^2 m"""

    name = "upre"
    requires_sigma = True
    uses_trace = True
    uses_residual = True

    def score(self, stats: IterationStats) -> Optional[float]:
        return upre_score(stats.residual_norm_sq, stats.trace, stats.sigma, stats.m)
