"""Verification and counterexample search for the matrix-weighted Costa EPI."""

__version__ = "0.1.0"
