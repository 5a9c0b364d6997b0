"""Galerkin matrices in a harmonic-oscillator eigenbasis.

The basis is the set of eigenfunctions of a reference harmonic oscillator
with frequency ``omega``, i.e. phi_n(y) = omega**(1/4) * psi_n(sqrt(omega)*y)
with psi_n the standard Hermite functions.  Position powers are integrated
with Gauss-Hermite quadrature, which is exact for the polynomial integrands
that occur here as long as 2*quad - 1 >= 2*(n-1) + power.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ladder",
    "position",
    "position_power",
    "kinetic",
    "hermite_functions_at_nodes",
]


def ladder(n: int) -> np.ndarray:
    """Annihilation operator on the first n levels (frequency-1 convention)."""
    return np.diag(np.sqrt(np.arange(1, n)), 1)


def hermite_functions_at_nodes(n: int, quad: int):
    """Evaluate the first n normalized Hermite polynomials at GH nodes.

    Returns ``(nodes, table)`` where ``table[k, i]`` equals
    h_k(nodes[i]) * sqrt(w_i), the normalized Hermite polynomial with the
    quadrature weight folded in, so that sums of products of rows integrate
    psi_m * psi_n * (polynomial) exactly.  The sqrt-weight folding keeps all
    intermediates of order one for n, quad of a few hundred.
    """
    nodes, weights = np.polynomial.hermite.hermgauss(quad)
    sw = np.sqrt(weights)
    table = np.zeros((n, quad))
    table[0] = np.pi ** -0.25 * sw
    if n > 1:
        table[1] = np.sqrt(2.0) * nodes * table[0]
    for k in range(2, n):
        table[k] = np.sqrt(2.0 / k) * nodes * table[k - 1] - np.sqrt((k - 1) / k) * table[k - 2]
    return nodes, table


def position_power(n: int, power: int, omega: float = 1.0, quad: int = 200) -> np.ndarray:
    """Matrix of y**power in the frequency-``omega`` oscillator basis.

    The quadrature runs in the dimensionless variable xi = sqrt(omega)*y,
    so the physical matrix picks up the factor omega**(-power/2).
    """
    needed = 2 * (n - 1) + power
    if 2 * quad - 1 < needed:
        raise ValueError(f"quad={quad} too small for degree {needed} integrand")
    nodes, table = hermite_functions_at_nodes(n, quad)
    mat = (table * nodes**power) @ table.T
    mat = 0.5 * (mat + mat.T)
    return mat * omega ** (-power / 2.0)


def position(n: int, omega: float = 1.0) -> np.ndarray:
    """Matrix of y, assembled from ladder operators (exact)."""
    a = ladder(n)
    return (a + a.T) / np.sqrt(2.0 * omega)


def kinetic(n: int, omega: float = 1.0) -> np.ndarray:
    """Matrix of -(1/2) d^2/dy^2 in the frequency-``omega`` basis (exact)."""
    a = ladder(n)
    return omega * (np.diag(2.0 * np.arange(n) + 1.0) - a @ a - a.T @ a.T) / 4.0
