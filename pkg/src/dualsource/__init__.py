"""Dual-sourcing spare-parts control with supply-mode dependent failure rates."""

__version__ = "0.1.0"
