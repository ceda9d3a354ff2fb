"""Empathetic response generation driven by emotional-causality graphs."""

__version__ = "0.1.0"
