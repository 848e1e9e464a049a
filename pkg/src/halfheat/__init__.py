"""Numerical companion for the half-Laplacian heat equation with power nonlinearity.

Modules: ``quadrature`` (adaptive Gauss-Kronrod and radial reductions),
``profiles`` (rho, rho_alpha, eta), ``kernel`` (half-Laplacian by PV
quadrature and by FFT), ``mn`` (M_n and p_*), ``energy`` (weighted energies,
Pohozaev-type identities, monotonicity), ``dynamics`` (spectral blow-up
runs and similarity variables) and ``cli``.
"""

__version__ = "0.1.0"
