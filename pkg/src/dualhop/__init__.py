"""Outage, capacity and phase-control analysis of a hybrid FSO/RF to underwater optical relay chain."""

__version__ = "0.1.0"
