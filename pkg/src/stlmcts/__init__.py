"""STL-guided Monte Carlo Tree Search for fixed-wing traffic-pattern planning."""

__version__ = "0.1.0"
