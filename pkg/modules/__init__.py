"""Numerical building blocks of the sepsis control toolkit."""
