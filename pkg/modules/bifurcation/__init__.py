"""Equilibria, stability, one-parameter sweeps and oscillation analysis."""
