"""Obstacle-constrained minimizing-movement flows for bending energies on graphs."""

__version__ = "0.1.0"
