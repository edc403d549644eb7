"""Tensor calculus on charts carrying an integrable nilpotent structure."""

__version__ = "0.1.0"
