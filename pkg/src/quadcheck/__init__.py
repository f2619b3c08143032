"""Quadcopter attitude-control simulation and temporal-logic evaluation."""

__version__ = "0.1.0"
