"""Separated drone route networks over voxelized urban airspace."""

__version__ = "0.1.0"
