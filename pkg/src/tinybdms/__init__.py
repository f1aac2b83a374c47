"""tinybdms: a small big-data management system."""

__version__ = "0.1.0"
