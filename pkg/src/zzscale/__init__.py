"""Zig-Zag sampling with exact sub-sampling and its large-sample limits."""

__version__ = "0.1.0"
