"""Proliferating Brownian particles with moderate interaction and their FKPP limit."""

__version__ = "0.1.0"
