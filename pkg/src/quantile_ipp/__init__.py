"""Informative path planning for quantile estimation and specimen-location selection."""

__version__ = "0.1.0"
