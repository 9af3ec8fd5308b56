"""Safety games on concurrent programs under SC and TSO."""

__version__ = "0.1.0"
