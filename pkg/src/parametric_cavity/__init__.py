"""Photon creation in a 1D cavity with a sinusoidally oscillating wall."""

__version__ = "0.1.0"

from .cavity_model import CavityConfig, coupling_g, coupling_v  # noqa: E402,F401
