"""Learned SE(3) Hamiltonian dynamics, energy-shaping control, and safe navigation."""

from . import control, governor, rigid_body, se3, world

__all__ = ["control", "governor", "rigid_body", "se3", "world"]
__version__ = "0.1.0"
