"""
Oracle Plugin - the exact relative error, an unbeatable baseline
"""

from typing import Optional

from plugins.base_plugin import IterationStats, StoppingRulePlugin


class OraclePlugin(StoppingRulePlugin):
    """Argmin of the true error; needs the ground truth and costs nothing"""

    name = "oracle"
    requires_truth = True

    def score(self, stats: IterationStats) -> Optional[float]:
        return stats.true_error
