"""
Utility modules for twingauge
"""
