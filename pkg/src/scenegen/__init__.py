"""Scenario generation for service-ecosystem computational experiments."""

__version__ = "0.1.0"
