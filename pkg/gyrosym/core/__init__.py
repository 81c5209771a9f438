"""Numerical core: rotation group, invariant forms, dynamics and symmetry analysis."""
