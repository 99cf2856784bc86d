"""Deterministic sealed-bid tendering on a simulated ledger, with a citizen auditor."""

__version__ = "0.1.0"
