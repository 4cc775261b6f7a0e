"""Planar gait laboratory: walker simulation, imitation-reward PPO and gait symmetry analysis."""

__version__ = "0.1.0"
