"""Opportunistic superposition coding on multi-band multi-access fading channels."""

__version__ = "0.1.0"
