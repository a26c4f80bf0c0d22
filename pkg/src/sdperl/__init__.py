"""Reinforcement-learning feature selection for file-level defect prediction."""

__version__ = "0.1.0"
