"""Superpixel benchmark toolkit: metrics, reference algorithms and the evaluation pipeline."""

__version__ = "0.1.0"
