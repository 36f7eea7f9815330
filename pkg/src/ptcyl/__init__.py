"""
ptcyl - Spectral poloidal-toroidal solver for the finite cylinder

Navier-Stokes and induction equations between two rotating end disks,
with influence-matrix boundary coupling and an insulating exterior.
"""

__version__ = "0.1.0"
