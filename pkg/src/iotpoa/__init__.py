"""Discrete-event simulator of a clustered IoT network feeding a PoA validator network."""

__version__ = "0.1.0"
