"""Simulation harness: in-process transport, cheating owners, sessions and experiments."""
