"""Explicit Runge-Kutta time integration under piecewise-constant controls."""
