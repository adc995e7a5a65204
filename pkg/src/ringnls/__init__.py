"""Segregated ring-of-bumps solutions of a coupled cubic Schrodinger system."""

__version__ = "0.1.0"
