"""Device-independent relativistic quantum bit commitment: protocols, adversaries and a light-speed harness."""

__version__ = "0.1.0"
