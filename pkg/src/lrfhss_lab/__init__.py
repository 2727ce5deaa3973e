"""Desk-scale laboratory for direct-to-satellite LR-FHSS networks.

Closed-form outage expressions (plain and D2D-aided LR-FHSS) cross-
validated against a Monte-Carlo event simulator, plus the supporting
special functions, satellite geometry, shadowed-Rice channel model, and
GF(4) cluster code.
"""

from . import analytic, channel, geometry, mcsim, netcode, specfun

__all__ = ["analytic", "channel", "geometry", "mcsim", "netcode", "specfun"]
__version__ = "0.1.0"
