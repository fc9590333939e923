"""Gaussian-process BO over control windows and the control-dataset generator."""
