"""Configuration-model hopcount simulation and branching-process numerics."""

__version__ = "0.1.0"
