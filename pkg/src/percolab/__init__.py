"""Monte Carlo laboratory for critical 2D percolation scaling limits."""

__version__ = "0.1.0"
