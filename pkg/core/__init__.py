"""
twingauge Core Modules
Kaczmarz reconstruction with twin error gauges and statistical stopping rules
"""

__version__ = "1.0.0"
