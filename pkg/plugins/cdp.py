"""
CDP Plugin - complementary discrepancy principle, first sweep that satisfies it
"""

from typing import Optional

from core.stat_rules import cdp_check
from plugins.base_plugin import IterationStats, StoppingRulePlugin


class CDPPlugin(StoppingRulePlugin):
    """Stop once ||b - A x_k||^2 <= sigma^2 (m - t_k)"""

    name = "cdp"
    selection = "first"
    requires_sigma = True
    uses_trace = True
    uses_residual = True

    def score(self, stats: IterationStats) -> Optional[float]:
        # margin of the discrepancy condition; <= 0 once it holds
        return stats.residual_norm_sq - stats.sigma ** 2 * (stats.m - stats.trace)

    def triggered(self, stats: IterationStats) -> bool:
        return cdp_check(stats.residual_norm_sq, stats.trace, stats.sigma, stats.m)
