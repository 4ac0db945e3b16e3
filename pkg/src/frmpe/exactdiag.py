"""Exact diagonalization of the two-level/single-mode Hamiltonian.

H = (Omega/2) sigma_x + omega a^+ a + g sigma_z (a^+ + a)

is represented in the product basis {|+z>, |-z>} x {|0> .. |cutoff>} as the
block matrix

    [[ omega n + g L,   (Omega/2) I ],
     [ (Omega/2) I,     omega n - g L ]],     L = a + a^+,

and the lowest two eigenpairs are obtained with a dense symmetric solver.
The Fock cutoff is doubled until the ground energy moves by less than the
requested tolerance between consecutive levels; the returned result is the
finer of the converged pair.

H commutes with the parity operator sigma_x exp(i pi a^+ a), and the ground
state carries parity -1. When the lowest two levels are numerically
degenerate (deep coupling, or Omega = 0 where the degeneracy is exact) the
solver diagonalizes parity inside the two-dimensional ground subspace and
keeps the parity -1 member, so the reported state satisfies the parity
invariant even when the eigensolver alone cannot resolve it.

The spinor branch wavefunctions are reconstructed as

    Psi^+(x) = sqrt(2) sum_n v+_n psi_n(x),
    Psi^-(x) = -sqrt(2) sum_n v-_n psi_n(x) = Psi^+(-x),

with psi_n the unit-norm oscillator eigenfunctions, so <Psi^+|Psi^+> = 1
exactly as for the variational branches. The overall sign is fixed by
requiring the integral of Psi^+ over x > 0 to be positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .errors import DomainError, NonConvergedError
from .model import ModelParams

__all__ = [
    "EDConfig",
    "EDResult",
    "build_hamiltonian",
    "ground_state",
    "ed_wavefunction",
    "hermite_functions",
]


@dataclass(frozen=True)
class EDConfig:
    """Convergence control for the adaptive cutoff loop.

    cutoff          : starting Fock cutoff (basis holds states |0>..|cutoff>)
    tol             : stop once successive ground energies differ by less
    max_cutoff      : raise NonConvergedError beyond this cutoff
    degeneracy_rtol : two-level subspace is treated as degenerate when the
                      gap falls below degeneracy_rtol * max(1, |E0|)
    """

    cutoff: int = 16
    tol: float = 1e-10
    max_cutoff: int = 4096
    degeneracy_rtol: float = 1e-8

    def __post_init__(self):
        if self.cutoff < 1 or self.max_cutoff < self.cutoff:
            raise DomainError(f"need 1 <= cutoff <= max_cutoff, got {self.cutoff}, {self.max_cutoff}")
        if not (self.tol > 0.0):
            raise DomainError(f"tolerance must be positive, got {self.tol}")


@dataclass(frozen=True)
class EDResult:
    """Converged ground-state data.

    energy      : ground energy E0
    amplitudes  : unit ground vector on the product basis, |+z> block first
    cutoff_used : Fock cutoff the result was computed at
    gap         : E1 - E0 at the final cutoff
    sigma_x     : <sigma_x>
    corr        : <sigma_z (a^+ + a)>
    nphot       : <a^+ a>
    parity      : <sigma_x exp(i pi a^+ a)>, -1 for the physical ground state
    """

    energy: float
    amplitudes: np.ndarray
    cutoff_used: int
    gap: float
    sigma_x: float
    corr: float
    nphot: float
    parity: float

    @property
    def vplus(self) -> np.ndarray:
        return self.amplitudes[: self.cutoff_used + 1]

    @property
    def vminus(self) -> np.ndarray:
        return self.amplitudes[self.cutoff_used + 1 :]


def build_hamiltonian(model: ModelParams, cutoff: int) -> np.ndarray:
    """Dense Hamiltonian on the 2 (cutoff+1) dimensional product basis.

    cutoff is the highest retained Fock index; cutoff = 0 keeps only the
    vacuum and gives the bare 2 x 2 qubit block.
    """
    if cutoff < 0:
        raise DomainError(f"cutoff must be non-negative, got {cutoff}")
    dim = cutoff + 1
    n = np.arange(dim, dtype=float)
    ladder = np.sqrt(n[1:])
    L = np.diag(ladder, 1) + np.diag(ladder, -1)
    num = np.diag(model.omega * n)
    spin = 0.5 * model.Omega * np.eye(dim)
    H = np.block([[num + model.g * L, spin], [spin, num - model.g * L]])
    return H


def _parity_apply(v: np.ndarray, dim: int) -> np.ndarray:
    """Apply sigma_x exp(i pi a^+ a): swap branches, weight level n by (-1)^n."""
    signs = np.where(np.arange(dim) % 2 == 0, 1.0, -1.0)
    return np.concatenate([signs * v[dim:], signs * v[:dim]])


def _half_line_integrals(n_max: int) -> np.ndarray:
    """I_n = integral over x > 0 of psi_n(x), by the derivative recurrence.

    Integrating psi_n' = sqrt(n/2) psi_{n-1} - sqrt((n+1)/2) psi_{n+1} over
    the half line gives
    I_{n+1} = sqrt(2/(n+1)) (psi_n(0) + sqrt(n/2) I_{n-1}).
    """
    I = np.zeros(n_max)
    at0 = np.zeros(n_max)
    I[0] = math.pi**0.25 / math.sqrt(2.0)
    at0[0] = math.pi**-0.25
    if n_max > 1:
        I[1] = math.sqrt(2.0) * math.pi**-0.25
    for k in range(2, n_max):
        at0[k] = -math.sqrt((k - 1.0) / k) * at0[k - 2]
        I[k] = math.sqrt(2.0 / k) * (at0[k - 1] + math.sqrt((k - 1.0) / 2.0) * I[k - 2])
    return I


def _solve_at_cutoff(model: ModelParams, cutoff: int, config: EDConfig):
    dim = cutoff + 1
    H = build_hamiltonian(model, cutoff)
    vals, vecs = eigh(H, subset_by_index=(0, 1))
    e0, e1 = float(vals[0]), float(vals[1])
    scale = max(1.0, abs(e0))
    if e1 - e0 < config.degeneracy_rtol * scale:
        # pick the parity -1 member of the numerically degenerate pair
        pv0 = _parity_apply(vecs[:, 0], dim)
        pv1 = _parity_apply(vecs[:, 1], dim)
        P = np.array(
            [
                [vecs[:, 0] @ pv0, vecs[:, 0] @ pv1],
                [vecs[:, 1] @ pv0, vecs[:, 1] @ pv1],
            ]
        )
        P = 0.5 * (P + P.T)
        pw, pv = np.linalg.eigh(P)
        pick = int(np.argmin(np.abs(pw + 1.0)))
        v = vecs @ pv[:, pick]
        v /= np.linalg.norm(v)
    else:
        v = vecs[:, 0]
    vplus, vminus = v[:dim].copy(), v[dim:].copy()
    if math.sqrt(2.0) * float(_half_line_integrals(dim) @ vplus) < 0.0:
        vplus, vminus = -vplus, -vminus
    return e0, e1, vplus, vminus


def _observables(model: ModelParams, vplus: np.ndarray, vminus: np.ndarray):
    dim = vplus.size
    n = np.arange(dim, dtype=float)
    ladder = np.sqrt(n[1:])
    L = np.diag(ladder, 1) + np.diag(ladder, -1)
    signs = np.where(np.arange(dim) % 2 == 0, 1.0, -1.0)
    sigma_x = 2.0 * float(vplus @ vminus)
    corr = float(vplus @ L @ vplus) - float(vminus @ L @ vminus)
    nphot = float(n @ (vplus**2 + vminus**2))
    parity = 2.0 * float((signs * vplus) @ vminus)
    return sigma_x, corr, nphot, parity


def ground_state(model: ModelParams, config: EDConfig = EDConfig()) -> EDResult:
    """Ground state with adaptive cutoff doubling.

    Raises NonConvergedError (carrying the best result so far in .best) if
    max_cutoff is reached before two consecutive levels agree to tol.
    """
    prev_energy = None
    prev_result = None
    cutoff = config.cutoff
    while cutoff <= config.max_cutoff:
        e0, e1, vplus, vminus = _solve_at_cutoff(model, cutoff, config)
        sigma_x, corr, nphot, parity = _observables(model, vplus, vminus)
        result = EDResult(
            energy=e0,
            amplitudes=np.concatenate([vplus, vminus]),
            cutoff_used=cutoff,
            gap=e1 - e0,
            sigma_x=sigma_x,
            corr=corr,
            nphot=nphot,
            parity=parity,
        )
        if prev_energy is not None and abs(e0 - prev_energy) < config.tol:
            return result
        prev_energy = e0
        prev_result = result
        cutoff *= 2
    raise NonConvergedError(
        f"ground energy not converged to {config.tol} by cutoff {config.max_cutoff}",
        best=prev_result,
    )


def hermite_functions(grid, n_max: int) -> np.ndarray:
    """Matrix psi_n(x_k) of unit-norm oscillator eigenfunctions, n < n_max.

    Uses the stable normalized recurrence
    psi_k = sqrt(2/k) x psi_{k-1} - sqrt((k-1)/k) psi_{k-2}.
    """
    grid = np.asarray(grid, dtype=float)
    if n_max < 1:
        raise DomainError(f"need n_max >= 1, got {n_max}")
    out = np.zeros((grid.size, n_max))
    out[:, 0] = math.pi**-0.25 * np.exp(-0.5 * grid**2)
    if n_max > 1:
        out[:, 1] = math.sqrt(2.0) * grid * out[:, 0]
    for k in range(2, n_max):
        out[:, k] = np.sqrt(2.0 / k) * grid * out[:, k - 1] - np.sqrt((k - 1.0) / k) * out[:, k - 2]
    if not np.all(np.isfinite(out)):
        raise DomainError("oscillator eigenfunction recurrence produced non-finite values")
    return out


def ed_wavefunction(result: EDResult, grid):
    """Spinor branch wavefunctions of a converged ground state on a grid.

    Both branches carry unit norm, matching the variational convention;
    Psi^-(x) equals Psi^+(-x) up to eigensolver accuracy.
    """
    grid = np.asarray(grid, dtype=float)
    B = hermite_functions(grid, result.vplus.size)
    psi_plus = math.sqrt(2.0) * (B @ result.vplus)
    psi_minus = -math.sqrt(2.0) * (B @ result.vminus)
    return psi_plus, psi_minus
