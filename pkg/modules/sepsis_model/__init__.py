"""Sepsis immune-response ODE models: parameters, states and right-hand sides."""
