"""
GCV Plugin - generalized cross validation, argmin over all sweeps
"""

import logging
from typing import Optional

from core.stat_rules import gcv_score
from plugins.base_plugin import IterationStats, StoppingRulePlugin
from utils.errors import DegenerateDenominator

logger = logging.getLogger(__name__)


class GCVPlugin(StoppingRulePlugin):
    """G_k = ||b - A x_k||^2 / (m - t_k)^2; no noise level needed"""

    name = "gcv"
    uses_trace = True
    uses_residual = True

    def score(self, stats: IterationStats) -> Optional[float]:
        try:
            return gcv_score(stats.residual_norm_sq, stats.trace, stats.m)
        except DegenerateDenominator as e:
            logger.warning("sweep %d excluded: %s", stats.k, e)
            return None
