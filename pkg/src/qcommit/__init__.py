"""Quantum reinforcement learning for two-stage unit commitment."""

__version__ = "0.1.0"
