"""Spectrum Sharing Lab - contention-based spectrum access with adaptive modulation"""

__version__ = "1.0.0"
