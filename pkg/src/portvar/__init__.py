"""Critical points, discriminants and feasible varieties of cumulant portfolio utilities."""

__version__ = "0.1.0"
