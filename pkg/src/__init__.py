"""Morse-theoretic mirror bundle data of the perturbed elliptic umbilic."""

__version__ = "0.1.0"
