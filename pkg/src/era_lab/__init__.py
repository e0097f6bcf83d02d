"""Simulation of environment reconfiguration attacks (ERA) on OFDM links by a binary-phase IRS."""

__version__ = "0.1.0"
