"""pttreg: point-tree attention for rigid point cloud registration."""

__version__ = "0.1.0"
