"""
Stopping-rule plugins for twingauge
"""
