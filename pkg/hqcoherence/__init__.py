"""Dephasing of the double-dot hybrid qubit under quasi-static noise"""

__version__ = "0.0.0"
