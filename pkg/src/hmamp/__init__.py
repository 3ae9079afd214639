"""Adversarial-motion-prior learning of human-style hammering on a planar arm."""

__version__ = "0.1.0"
