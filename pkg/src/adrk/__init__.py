"""Trainable explicit Runge-Kutta schemes."""

__version__ = "0.1.0"
