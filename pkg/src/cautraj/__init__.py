"""Causal-prior lane-change trajectory planning toolkit."""

__version__ = "0.1.0"
