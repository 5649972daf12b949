"""Numerical laboratory for wave equations with time-dependent visco-elastic damping.

The model is ``u_tt - Lap u + g(t) (-Lap) u_t = 0``.  After a Fourier
transform each frequency ``r = |xi|`` evolves independently; the package
integrates those modes, classifies phase-space zones, assembles higher-order
energies and checks them against the decay envelopes of the theory.
"""
from .coefficients import (Coefficient, Regime, catalog, check_conditions,
                           make_builtin, parse_coefficient)

__all__ = ["Coefficient", "Regime", "catalog", "check_conditions",
           "make_builtin", "parse_coefficient"]
__version__ = "0.1.0"
