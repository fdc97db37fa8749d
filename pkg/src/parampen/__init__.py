"""Parametric exact penalty functions: singular and smoothing penalty terms,
penalty continuation, rates of steepest descent and brute-force diagnostics."""

__version__ = "0.1.0"
