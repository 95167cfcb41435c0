"""
Base Plugin Class - Abstract interface for all stopping-rule plugins
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

from utils.errors import ConfigError


@dataclass
class IterationStats:
    """What a stopping rule sees after sweep k"""
    k: int
    residual_norm_sq: float
    trace: float
    m: int
    sigma: Optional[float] = None
    true_error: Optional[float] = None


class StoppingRulePlugin(ABC):
    """
    Abstract base class for stopping rules of plain Kaczmarz

    A rule either selects the argmin of its score over all executed sweeps
    (``selection = "argmin"``), stops at the first sweep where ``triggered``
    holds (``"first"``), or never stops (``"none"``).
    """

    name = ""
    selection = "argmin"
    requires_sigma = False
    requires_truth = False
    uses_trace = False
    uses_residual = False
    enabled = True

    @abstractmethod
    def score(self, stats: IterationStats) -> Optional[float]:
        """
        Score of the iterate after sweep k

        Returns:
            The score, or None when it is undefined at this sweep
        """
        pass

    def triggered(self, stats: IterationStats) -> bool:
        """Stop condition for first-hit rules"""
        return False

    def check_inputs(self, sigma: Optional[float], has_truth: bool):
        """
        Raises:
            ConfigError: sigma or ground truth missing where required
        """
        if self.requires_sigma and sigma is None:
            raise ConfigError(f"stopping rule '{self.name}' requires the noise level sigma")
        if self.requires_sigma and sigma < 0:
            raise ConfigError(f"sigma must be non-negative, got {sigma}")
        if self.requires_truth and not has_truth:
            raise ConfigError(f"stopping rule '{self.name}' requires the ground truth x_star")

    def is_enabled(self) -> bool:
        """Disabled rules are skipped by the loader"""
        return self.enabled
