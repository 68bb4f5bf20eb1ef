"""
Common package for quadflow.
Shared utilities and logging setup.
"""

__version__ = "1.0.0"
