"""Verification engine for quantized multi-particle Painleve-Calogero systems."""

__version__ = "0.1.0"
