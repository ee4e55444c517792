"""Deterministic indoor scanning simulator and view-path planning library.

Combines frontier-driven exploration tasks with surface-uncertainty-driven
reconstruction tasks, sequences both through an open ATSP tour, and runs
fully reproducible scanning episodes against procedural voxel scenes.
"""

__version__ = "0.1.0"
