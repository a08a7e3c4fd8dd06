"""Figure rendering for magnonlab CSV/JSON outputs."""

__version__ = "0.1.0"
