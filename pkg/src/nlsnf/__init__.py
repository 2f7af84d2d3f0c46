"""Numerical laboratory for plane-wave stability of the periodic NLS.

Submodules
----------
lattice     Fourier lattices, Sobolev norms, shells, orbital distances.
simulate    Split-step spectral integration and stability diagnostics.
reduction   Zero-mode reduction, Taylor expansion, Bogoliubov diagonalization.
poly        Sparse polynomial Hamiltonians and vector fields.
qcomplex    Exact complex rationals for exact-arithmetic normal forms.
norms       Tame and ball norm estimators.
birkhoff    Resonance classification, homological equation, normal forms.
resonance   Small-divisor enumeration and mass-parameter scans.
svg         Minimal deterministic line charts.
cli         Command-line experiments.
"""

__version__ = "0.1.0"
