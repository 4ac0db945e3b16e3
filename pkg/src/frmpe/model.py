"""Physical parameters and derived coupling scales of the quantum Rabi model.

The Hamiltonian treated throughout the package is

    H = (Omega/2) sigma_x + omega a^+ a + g sigma_z (a^+ + a),

with hbar = m = 1 everywhere. In the dimensionless position representation
(x = (a + a^+)/sqrt(2)) the two sigma_z branches see displaced oscillators

    h^(+-) = (omega/2) (p^2 + (x +- g')^2),      g' = sqrt(2) g / omega,

up to the constant eps0 = -omega (g'^2 + 1)/2. Energies are measured in
units of Omega (Omega = 1 by default); all operations accept a general
Omega so decoupled limits can be exercised directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = ["ModelParams", "CouplingScales", "derive_scales", "coupling_ratio"]


@dataclass(frozen=True)
class ModelParams:
    """Qubit splitting Omega, oscillator frequency omega, coupling g."""

    omega: float
    g: float
    Omega: float = 1.0

    def __post_init__(self):
        if not (self.omega > 0.0) or not math.isfinite(self.omega):
            raise DomainError(f"omega must be positive and finite, got {self.omega}")
        if self.Omega < 0.0 or not math.isfinite(self.Omega):
            raise DomainError(f"Omega must be non-negative and finite, got {self.Omega}")
        if self.g < 0.0 or not math.isfinite(self.g):
            raise DomainError(f"g must be non-negative and finite, got {self.g}")


@dataclass(frozen=True)
class CouplingScales:
    """Derived scalars: displacement scale, crossover couplings, energy offset.

    g_prime : sqrt(2) g / omega, dimensionless displacement of the branch wells
    g_c0    : sqrt(omega Omega) / 2
    g_c     : sqrt(omega^2 + sqrt(omega^4 + g_c0^4)), the crossover coupling
              used to normalize every sweep axis
    eps0    : -omega (g_prime^2 + 1) / 2, constant shift of the branch form
    """

    g_prime: float
    g_c0: float
    g_c: float
    eps0: float


def derive_scales(params: ModelParams) -> CouplingScales:
    """Evaluate the derived coupling scales for a parameter set."""
    omega, g, Omega = params.omega, params.g, params.Omega
    g_prime = math.sqrt(2.0) * g / omega
    g_c0 = math.sqrt(omega * Omega) / 2.0
    g_c = math.sqrt(omega**2 + math.sqrt(omega**4 + g_c0**4))
    eps0 = -omega * (g_prime**2 + 1.0) / 2.0
    return CouplingScales(g_prime=g_prime, g_c0=g_c0, g_c=g_c, eps0=eps0)


def coupling_ratio(params: ModelParams) -> float:
    """Return g / g_c for the parameter set."""
    g_c = derive_scales(params).g_c
    if g_c <= 0.0:
        raise DomainError("g_c vanishes (requires omega > 0 or Omega > 0)")
    return params.g / g_c
