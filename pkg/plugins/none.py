"""
No-Rule Plugin - plain Kaczmarz for the full sweep budget
"""

from typing import Optional

from plugins.base_plugin import IterationStats, StoppingRulePlugin


class NoRulePlugin(StoppingRulePlugin):

    name = "none"
    selection = "none"

    def score(self, stats: IterationStats) -> Optional[float]:
        return None
