"""Bell-state rotation estimation: simulation, particle filtering and campaigns."""

__version__ = "0.1.0"
