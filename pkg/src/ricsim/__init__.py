"""Desk-scale near-RT RIC, E2 agent and simulated RAN speaking a TLV flavour of E2AP."""

__version__ = "0.1.0"
