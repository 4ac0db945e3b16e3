"""Closed-form Gaussian matrix elements of the multipolaron trial state.

The trial ground state is an odd-parity spinor built from N displaced,
frequency-renormalized oscillator wavepackets ("polarons")

    |G> = (1/sqrt(2)) sum_n C_n ( phi_n^+(x) |+z>  -  phi_n^-(x) |-z> ),
    phi_n^(+-)(x) = (xi_n/pi)^(1/4) exp(-xi_n (x +- zeta_n g')^2 / 2),

so Psi^+(x) = Psi^-(-x) holds by construction. With xi_n = 1 pinned the
expansion reduces to a plain coherent-state superposition (CSE mode); the
per-polaron width factor xi_n is the frequency renormalization that the
FRMPE mode adds.

Every matrix element between two polarons has a closed form. With
P = xi_n + xi_m the same-branch overlap is

    S_nm = sqrt(2) [xi_n xi_m / P^2]^(1/4)
           * exp(-(zeta_n - zeta_m)^2 g'^2 xi_n xi_m / (2 P)),

the cross-branch overlap S_nmbar swaps (zeta_n - zeta_m) -> (zeta_n +
zeta_m), and the first and second moments are

    <x>_nm  = S_nm g' (-xi_m zeta_m - xi_n zeta_n) / P,
    <x2>_nm = S_nm [ 1/P + ((xi_m zeta_m + xi_n zeta_n) g' / P)^2 ].

Kinetic elements follow from differentiating the right-hand Gaussian:
phi_m'' = (4 D^2 x^2 + 4 D E x + E^2 + 2 D) phi_m with D = -xi_m/2 and
E = -g' xi_m zeta_m, giving

    <p^2>_nm = -(4 D^2 <x2>_nm + 4 D E <x>_nm + (E^2 + 2 D) S_nm)

and the displaced-branch element

    h+_nm = (omega/2) [ (1 - 4 D^2) <x2>_nm + (2 g' - 4 D E) <x>_nm
                        + (g'^2 - E^2 - 2 D) S_nm ].

The variational energy in Rayleigh-quotient form is

    E[C] = C.(h+ - (Omega/2) Sbar).C / C.S.C + eps0,

which is the constrained form whenever C.S.C = 1. All blocks are real
and symmetric; every closed form here is cross-checked against the
independent quadrature oracle in :mod:`frmpe.quadrature`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erfc

from .errors import DegenerateBasisError, DomainError
from .model import ModelParams, derive_scales

__all__ = [
    "AnsatzMode",
    "Polaron",
    "AnsatzState",
    "KernelBlock",
    "overlap_same",
    "overlap_cross",
    "moment_x",
    "moment_x2",
    "kinetic_element",
    "h_plus_element",
    "build_block",
    "energy",
    "observables",
    "wavefunction",
    "normalize",
    "plus_branch_weight",
]

NORM_TOL = 1e-14


class AnsatzMode(enum.Enum):
    """FRMPE searches the width factors; CSE pins every xi_n = 1."""

    FRMPE = "frmpe"
    CSE = "cse"


@dataclass(frozen=True)
class Polaron:
    """One displaced wavepacket: width factor xi > 0, displacement factor zeta.

    The |+z>-branch Gaussian sits at x = -zeta * g'.
    """

    xi: float
    zeta: float

    def __post_init__(self):
        if not (self.xi > 0.0) or not math.isfinite(self.xi):
            raise DomainError(f"polaron width factor must be positive, got xi={self.xi}")
        if not math.isfinite(self.zeta):
            raise DomainError(f"polaron displacement must be finite, got zeta={self.zeta}")


@dataclass(frozen=True)
class AnsatzState:
    """Trial-state parameter set: amplitudes C_n plus N polarons."""

    coeffs: tuple
    polarons: tuple
    mode: AnsatzMode = AnsatzMode.FRMPE

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        polarons = tuple(self.polarons)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "polarons", polarons)
        if len(coeffs) == 0 or len(coeffs) != len(polarons):
            raise DomainError(
                f"need equal, non-empty coefficient/polaron lists, got {len(coeffs)}/{len(polarons)}"
            )
        if not all(isinstance(p, Polaron) for p in polarons):
            raise DomainError("polarons must be Polaron instances")
        if self.mode is AnsatzMode.CSE and any(p.xi != 1.0 for p in polarons):
            raise DomainError("CSE mode requires xi = 1 exactly for every polaron")

    @property
    def n_polarons(self) -> int:
        return len(self.coeffs)

    def coeff_array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)

    def xi_array(self) -> np.ndarray:
        return np.array([p.xi for p in self.polarons], dtype=float)

    def zeta_array(self) -> np.ndarray:
        return np.array([p.zeta for p in self.polarons], dtype=float)


@dataclass(frozen=True)
class KernelBlock:
    """All pairwise matrix elements of a state, assembled once per (n, m).

    S     : same-branch overlaps S_nm (unit diagonal)
    X     : first moments <x>_nm
    X2    : second moments <x2>_nm
    P2    : kinetic elements <p^2>_nm
    Sbar  : cross-branch overlaps S_nmbar
    Hplus : displaced-branch elements h+_nm
    """

    S: np.ndarray
    X: np.ndarray
    X2: np.ndarray
    P2: np.ndarray
    Sbar: np.ndarray
    Hplus: np.ndarray


def _pair_arrays(xis, zetas, gp, omega):
    """Vectorized assembly of all six kernel matrices.

    The D, E differentiation coefficients belong to the right-hand (column)
    polaron; the assembled matrices are nevertheless symmetric because the
    underlying operators are Hermitian and all basis functions real.
    """
    xi_n = xis[:, None]
    xi_m = xis[None, :]
    ze_n = zetas[:, None]
    ze_m = zetas[None, :]
    P = xi_n + xi_m
    prod = xi_n * xi_m
    pref = math.sqrt(2.0) * (prod / P**2) ** 0.25
    S = pref * np.exp(-((ze_n - ze_m) ** 2) * gp**2 * prod / (2.0 * P))
    # the diagonal is identically 1 in exact arithmetic; pin it so the
    # assembled matrices inherit the exact value
    np.fill_diagonal(S, 1.0)
    Sbar = pref * np.exp(-((ze_n + ze_m) ** 2) * gp**2 * prod / (2.0 * P))
    W = xi_n * ze_n + xi_m * ze_m
    X = S * (-W / P) * gp
    X2 = S * (1.0 / P + (W * gp / P) ** 2)
    D = -0.5 * xi_m
    E = -gp * xi_m * ze_m
    P2 = -(4.0 * D**2 * X2 + 4.0 * D * E * X + (E**2 + 2.0 * D) * S)
    Hplus = 0.5 * omega * ((1.0 - 4.0 * D**2) * X2 + (2.0 * gp - 4.0 * D * E) * X + (gp**2 - E**2 - 2.0 * D) * S)
    return S, X, X2, P2, Sbar, Hplus


def build_block(state: AnsatzState, model: ModelParams) -> KernelBlock:
    """Assemble the full kernel block for a state."""
    scales = derive_scales(model)
    S, X, X2, P2, Sbar, Hplus = _pair_arrays(
        state.xi_array(), state.zeta_array(), scales.g_prime, model.omega
    )
    return KernelBlock(S=S, X=X, X2=X2, P2=P2, Sbar=Sbar, Hplus=Hplus)


def _pair(pn: Polaron, pm: Polaron):
    return np.array([pn.xi, pm.xi]), np.array([pn.zeta, pm.zeta])


def overlap_same(pn: Polaron, pm: Polaron, gp: float) -> float:
    """Same-branch overlap S_nm; equals 1 for identical polarons."""
    if pn == pm:
        return 1.0
    xis, zetas = _pair(pn, pm)
    return float(_pair_arrays(xis, zetas, gp, 1.0)[0][0, 1])


def overlap_cross(pn: Polaron, pm: Polaron, gp: float) -> float:
    """Cross-branch overlap S_nmbar = <phi_n^+(x)|phi_m^+(-x)>."""
    xis, zetas = _pair(pn, pm)
    return float(_pair_arrays(xis, zetas, gp, 1.0)[4][0, 1])


def moment_x(pn: Polaron, pm: Polaron, gp: float) -> float:
    """First moment <x>_nm between two same-branch polarons."""
    xis, zetas = _pair(pn, pm)
    return float(_pair_arrays(xis, zetas, gp, 1.0)[1][0, 1])


def moment_x2(pn: Polaron, pm: Polaron, gp: float) -> float:
    """Second moment <x2>_nm between two same-branch polarons."""
    xis, zetas = _pair(pn, pm)
    return float(_pair_arrays(xis, zetas, gp, 1.0)[2][0, 1])


def kinetic_element(pn: Polaron, pm: Polaron, gp: float) -> float:
    """Momentum-squared element <phi_n^+| p^2 |phi_m^+>."""
    xis, zetas = _pair(pn, pm)
    return float(_pair_arrays(xis, zetas, gp, 1.0)[3][0, 1])


def h_plus_element(pn: Polaron, pm: Polaron, model: ModelParams) -> float:
    """Displaced-branch element h+_nm = (omega/2) <phi_n^+|p^2 + (x+g')^2|phi_m^+>."""
    scales = derive_scales(model)
    xis, zetas = _pair(pn, pm)
    return float(_pair_arrays(xis, zetas, scales.g_prime, model.omega)[5][0, 1])


def _quadratic_forms(state: AnsatzState, model: ModelParams):
    block = build_block(state, model)
    c = state.coeff_array()
    norm = float(c @ block.S @ c)
    return block, c, norm


def energy(state: AnsatzState, model: ModelParams) -> float:
    """Variational energy in Rayleigh-quotient form.

    For a normalized state this is exactly the constrained energy
    C.h+.C - (Omega/2) C.Sbar.C + eps0; dividing by the norm form makes
    the expression invariant under rescaling of C so optimizers can search
    unconstrained coefficient space.
    """
    block, c, norm = _quadratic_forms(state, model)
    if norm <= 0.0:
        raise DegenerateBasisError(f"norm quadratic form is {norm}; basis numerically degenerate")
    scales = derive_scales(model)
    h = float(c @ (block.Hplus - 0.5 * model.Omega * block.Sbar) @ c)
    return h / norm + scales.eps0


def observables(state: AnsatzState, model: ModelParams):
    """Ground-state expectation values (sigma_x, corr, nphot).

    sigma_x : spin polarization <sigma_x> = -C.Sbar.C
    corr    : <sigma_z (a^+ + a)> = sqrt(2) C.X.C
    nphot   : mean photon number <a^+ a> = (C.(X2 + P2).C - 1)/2

    Each bilinear form is divided by the norm form, so the values are
    exact for normalized states and still well defined otherwise.
    """
    block, c, norm = _quadratic_forms(state, model)
    if norm <= 0.0:
        raise DegenerateBasisError(f"norm quadratic form is {norm}; basis numerically degenerate")
    sigma_x = -float(c @ block.Sbar @ c) / norm
    corr = math.sqrt(2.0) * float(c @ block.X @ c) / norm
    nphot = (float(c @ (block.X2 + block.P2) @ c) / norm - 1.0) / 2.0
    return sigma_x, corr, nphot


def _branch_matrix(xis: np.ndarray, zetas: np.ndarray, gp: float, grid: np.ndarray) -> np.ndarray:
    """B[k, n] = phi_n^+(x_k); the minus branch is the same matrix on -grid."""
    centers = -zetas * gp
    amp = (xis / math.pi) ** 0.25
    return amp[None, :] * np.exp(-0.5 * xis[None, :] * (grid[:, None] - centers[None, :]) ** 2)


def wavefunction(state: AnsatzState, model: ModelParams, grid: Sequence[float]):
    """Evaluate both spinor branch wavefunctions on a grid of x points.

    Psi^- is evaluated by running the identical Psi^+ code path on the
    negated grid, so reverse(psi_plus) == psi_minus bitwise whenever the
    grid itself is bitwise symmetric.
    """
    grid = np.asarray(grid, dtype=float)
    gp = derive_scales(model).g_prime
    xis, zetas, c = state.xi_array(), state.zeta_array(), state.coeff_array()
    psi_plus = _branch_matrix(xis, zetas, gp, grid) @ c
    psi_minus = _branch_matrix(xis, zetas, gp, -grid) @ c
    return psi_plus, psi_minus


def normalize(state: AnsatzState, model: ModelParams = None, gp: float = None) -> AnsatzState:
    """Rescale the coefficients so the norm form C.S.C equals 1.

    The direction of C is preserved. Either a model or the dimensionless
    displacement scale g' must be supplied (S depends only on g').
    """
    if gp is None:
        if model is None:
            raise TypeError("normalize needs either model or gp")
        gp = derive_scales(model).g_prime
    xis, zetas, c = state.xi_array(), state.zeta_array(), state.coeff_array()
    S = _pair_arrays(xis, zetas, gp, 1.0)[0]
    norm = float(c @ S @ c)
    if norm <= NORM_TOL:
        raise DegenerateBasisError(f"norm quadratic form {norm} <= {NORM_TOL}; cannot normalize")
    c = c / math.sqrt(norm)
    return AnsatzState(coeffs=tuple(c), polarons=state.polarons, mode=state.mode)


def plus_branch_weight(state: AnsatzState, model: ModelParams) -> float:
    """Integral of Psi^+ over x > 0, used to fix the sign convention of plots.

    For each polaron the half-line integral is
    (xi/pi)^(1/4) sqrt(pi/(2 xi)) erfc(zeta g' sqrt(xi/2)).
    """
    gp = derive_scales(model).g_prime
    xis, zetas, c = state.xi_array(), state.zeta_array(), state.coeff_array()
    halves = (xis / math.pi) ** 0.25 * np.sqrt(math.pi / (2.0 * xis)) * erfc(zetas * gp * np.sqrt(xis / 2.0))
    return float(c @ halves)
