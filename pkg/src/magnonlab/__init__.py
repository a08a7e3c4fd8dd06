"""Magnon spectra, spin-qubit couplings and entanglement-protocol dynamics
for ferromagnetic waveguide and bar geometries."""

__version__ = "0.1.0"
