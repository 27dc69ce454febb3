"""Multi-robot semantic exploration planner and grid-world benchmark."""

__version__ = "0.1.0"
