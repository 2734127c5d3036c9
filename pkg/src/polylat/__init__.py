"""Higher order polynomial lattice rules over GF(2) with tent-transformed random digital shifts."""

__version__ = "0.1.0"
