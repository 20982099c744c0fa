"""Rank-based teacher/student distillation for point goal navigation in a gridworld."""

__version__ = "0.1.0"
