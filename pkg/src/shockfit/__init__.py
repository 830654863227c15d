"""shockfit — shock fitting and decay-rate verification for scalar balance laws."""

__version__ = "0.4.0"
