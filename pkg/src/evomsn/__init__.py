"""Evolving multi-scale normalization for forecasting under distribution shift."""

__version__ = "0.1.0"
