"""Finite-truncation laboratory for the extended Thurston metric on geodesic currents."""

__version__ = "0.1.0"
