"""
Work Meter - operation accounting in Kaczmarz-sweep work units
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from utils.errors import TwinGaugeError

EVENTS = ("sweep", "residual", "gauge", "step_solve", "trace_update", "inner_product")


@dataclass
class WorkMeter:
    """
    Accumulates work units for a 2-D problem with m rows and n columns

    One work unit is one sweep, 4 m s operations, where s is the average
    number of nonzeros per row (sqrt(n) unless given). ``charge`` adds the
    tabulated cost of an event; ``record_ops`` is the hook solvers use to
    report the operations they actually performed.
    """
    m: int
    n: int
    row_density: Optional[float] = None
    work_units: float = 0.0
    ops: int = 0
    events: Counter = field(default_factory=Counter)

    def __post_init__(self):
        if self.row_density is None:
            self.row_density = math.sqrt(self.n)

    @classmethod
    def for_matrix(cls, A) -> "WorkMeter":
        return cls(m=A.n_rows, n=A.n_cols, row_density=A.row_density)

    @property
    def unit_ops(self) -> float:
        return 4.0 * self.m * self.row_density

    def event_ops(self, event: str) -> float:
        m, n, s = self.m, self.n, self.row_density
        costs = {
            "sweep": 4.0 * m * s,
            "trace_update": 4.0 * m * s,
            "residual": 2.0 * m * s + 3.0 * m,
            "inner_product": 2.0 * n,
            "gauge": 3.0 * n,
            "step_solve": 11.0 * n,
        }
        if event not in costs:
            raise TwinGaugeError(f"unknown work event: {event}")
        return costs[event]

    def charge(self, event: str, times: int = 1) -> "WorkMeter":
        self.work_units += times * self.event_ops(event) / self.unit_ops
        self.events[event] += times
        return self

    def record_ops(self, count: int):
        self.ops += int(count)

    @property
    def measured_units(self) -> float:
        """Instrumented operations converted to work units"""
        return self.ops / self.unit_ops


def meter_charge(meter: WorkMeter, event: str) -> WorkMeter:
    """Add the tabulated cost of one event"""
    return meter.charge(event)
