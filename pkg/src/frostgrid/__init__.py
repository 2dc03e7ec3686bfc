"""Frost-detection tile datasets with HEALPix spatial folds and terrain-aware evaluation."""

__version__ = "0.1.0"
