"""Discrete-event simulator of load-adaptive handoff in an 802.11 ESS
with a WMAN overlay."""

__version__ = "0.1.0"
