"""Tests for the exact-diagonalization benchmark oracle.

ED is the reference the variational solver is judged against, so it gets its
own independent checks: hand-built small matrices, decoupled limits with
closed-form ground states, internal convergence/monotonicity, a
Hellmann-Feynman derivative identity, and a frozen regression table produced
by a one-off convergence study (tests/data/ed_reference.txt).
"""

import math
import pathlib

import numpy as np
import pytest
from scipy.linalg import eigh

from frmpe.errors import DomainError, NonConvergedError
from frmpe.exactdiag import (
    EDConfig,
    EDResult,
    build_hamiltonian,
    ed_wavefunction,
    ground_state,
    hermite_functions,
)
from frmpe.model import ModelParams, derive_scales

DATA = pathlib.Path(__file__).parent / "data"


def load_reference():
    header = {}
    rows = []
    names = None
    for line in (DATA / "ed_reference.txt").read_text().splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body and " " not in body.split("=")[0]:
                key, _, val = body.partition("=")
                header[key] = val
            continue
        if names is None:
            names = line.split(",")
            continue
        rows.append(dict(zip(names, line.split(","))))
    return header, rows


# ---------------------------------------------------------------------------
# Hamiltonian assembly


def test_hamiltonian_smallest_block():
    # cutoff 0 keeps only the Fock vacuum: H = [[0, Omega/2], [Omega/2, 0]]
    model = ModelParams(omega=1.0, g=0.0, Omega=1.0)
    H = build_hamiltonian(model, cutoff=0)
    np.testing.assert_array_equal(H, np.array([[0.0, 0.5], [0.5, 0.0]]))


def test_hamiltonian_structure():
    model = ModelParams(omega=0.3, g=0.12, Omega=0.8)
    cutoff = 5
    H = build_hamiltonian(model, cutoff)
    dim = cutoff + 1
    assert H.shape == (2 * dim, 2 * dim)
    np.testing.assert_allclose(H, H.T, rtol=0.0, atol=0.0)
    upper = H[:dim, :dim]
    lower = H[dim:, dim:]
    off = H[:dim, dim:]
    # off-diagonal block is (Omega/2) * identity
    np.testing.assert_array_equal(off, 0.4 * np.eye(dim))
    # diagonal blocks: omega * n on the diagonal, +-g sqrt(n+1) on the first
    # sub/superdiagonal, mirrored between the two sigma_z sectors
    np.testing.assert_allclose(np.diag(upper), 0.3 * np.arange(dim), atol=1e-15)
    np.testing.assert_allclose(np.diag(lower), 0.3 * np.arange(dim), atol=1e-15)
    expected_ladder = 0.12 * np.sqrt(np.arange(1, dim))
    np.testing.assert_allclose(np.diag(upper, 1), expected_ladder, atol=1e-15)
    np.testing.assert_allclose(np.diag(lower, 1), -expected_ladder, atol=1e-15)


def test_hamiltonian_zero_splitting_block_diagonal():
    model = ModelParams(omega=0.5, g=0.2, Omega=0.0)
    H = build_hamiltonian(model, cutoff=4)
    assert np.all(H[:5, 5:] == 0.0)


# ---------------------------------------------------------------------------
# ground-state limits


def test_zero_coupling_ground_state():
    model = ModelParams(omega=1.0, g=0.0, Omega=1.0)
    res = ground_state(model)
    assert abs(res.energy + 0.5) < 1e-12
    assert abs(res.sigma_x + 1.0) < 1e-10
    assert abs(res.nphot) < 1e-12
    assert abs(res.corr) < 1e-12
    assert abs(res.parity + 1.0) < 1e-10


def test_zero_splitting_ground_state():
    # Omega = 0: displaced oscillator, E = -g^2/omega, nphot = g^2/omega^2.
    # The spectrum is exactly twofold degenerate; the parity projection must
    # still deliver <Pi> = -1.
    model = ModelParams(omega=0.5, g=0.2, Omega=0.0)
    res = ground_state(model, EDConfig(tol=1e-12))
    assert abs(res.energy + 0.2**2 / 0.5) < 1e-10
    assert abs(res.nphot - (0.2 / 0.5) ** 2) < 1e-8
    assert abs(res.parity + 1.0) < 1e-8


def test_energy_monotone_in_cutoff():
    # variational property of Fock truncation: enlarging the basis can only
    # lower the ground energy
    model = ModelParams(omega=0.01, g=0.055, Omega=1.0)
    energies = []
    for cutoff in (8, 16, 32, 64, 128):
        H = build_hamiltonian(model, cutoff)
        energies.append(float(eigh(H, subset_by_index=(0, 0), eigvals_only=True)[0]))
    diffs = np.diff(energies)
    assert np.all(diffs <= 1e-14)


def test_amplitudes_normalized_and_parity():
    probe = ModelParams(omega=0.01, g=0.0, Omega=1.0)
    g_c = derive_scales(probe).g_c
    for ratio in (0.9, 1.05):
        model = ModelParams(omega=0.01, g=ratio * g_c, Omega=1.0)
        res = ground_state(model)
        assert abs(np.dot(res.amplitudes, res.amplitudes) - 1.0) < 1e-12
        assert abs(res.parity + 1.0) < 1e-8
        assert res.gap >= 0.0
        assert res.cutoff_used >= 1
        dim = res.cutoff_used + 1
        assert res.vplus.shape == (dim,)
        assert res.vminus.shape == (dim,)


def test_hellmann_feynman_derivative():
    # dE/dg = <sigma_z (a^+ + a)> = corr; check by central finite difference
    probe = ModelParams(omega=0.01, g=0.0, Omega=1.0)
    g_c = derive_scales(probe).g_c
    for ratio in (0.8, 1.0, 1.15):
        g = ratio * g_c
        h = 1e-6 * g_c
        res = ground_state(ModelParams(omega=0.01, g=g, Omega=1.0), EDConfig(tol=1e-12))
        ep = ground_state(ModelParams(omega=0.01, g=g + h, Omega=1.0), EDConfig(tol=1e-12))
        em = ground_state(ModelParams(omega=0.01, g=g - h, Omega=1.0), EDConfig(tol=1e-12))
        fd = (ep.energy - em.energy) / (2.0 * h)
        assert abs(fd - res.corr) < 1e-4 * max(1.0, abs(res.corr))


def test_nonconvergence_raises_with_best():
    model = ModelParams(omega=0.01, g=0.055, Omega=1.0)
    with pytest.raises(NonConvergedError) as excinfo:
        ground_state(model, EDConfig(cutoff=2, tol=1e-15, max_cutoff=8))
    assert isinstance(excinfo.value.best, EDResult)
    assert math.isfinite(excinfo.value.best.energy)


def test_config_validation():
    with pytest.raises(DomainError):
        EDConfig(cutoff=0)
    with pytest.raises(DomainError):
        EDConfig(tol=0.0)
    with pytest.raises(DomainError):
        EDConfig(cutoff=64, max_cutoff=32)


# ---------------------------------------------------------------------------
# real-space wavefunctions


def test_hermite_functions_orthonormal():
    grid = np.linspace(-14.0, 14.0, 5601)
    B = hermite_functions(grid, n_max=25)
    assert B.shape == (len(grid), 25)
    overlaps = B.T @ B * (grid[1] - grid[0])
    np.testing.assert_allclose(overlaps, np.eye(25), rtol=0.0, atol=1e-7)


def test_hermite_functions_large_order_finite():
    grid = np.linspace(-20.0, 20.0, 101)
    B = hermite_functions(grid, n_max=512)
    assert np.all(np.isfinite(B))


def test_ed_wavefunction_zero_coupling():
    model = ModelParams(omega=1.0, g=0.0, Omega=1.0)
    res = ground_state(model)
    grid = np.linspace(-6.0, 6.0, 241)
    psi_p, psi_m = ed_wavefunction(res, grid)
    exact = math.pi ** (-0.25) * np.exp(-(grid**2) / 2.0)
    np.testing.assert_allclose(psi_p, exact, rtol=0.0, atol=1e-10)
    np.testing.assert_allclose(psi_m, exact, rtol=0.0, atol=1e-10)


def test_ed_wavefunction_branch_parity_and_norm():
    probe = ModelParams(omega=0.01, g=0.0, Omega=1.0)
    g_c = derive_scales(probe).g_c
    model = ModelParams(omega=0.01, g=1.05 * g_c, Omega=1.0)
    res = ground_state(model)
    grid = np.linspace(-16.0, 16.0, 6401)
    psi_p, psi_m = ed_wavefunction(res, grid)
    # mirror symmetry of the negative-parity ground state
    np.testing.assert_allclose(psi_m, psi_p[::-1], rtol=0.0, atol=1e-12)
    # branch normalization: integral of (psi_+^2 + psi_-^2)/2 = 1
    dx = grid[1] - grid[0]
    total = 0.5 * (np.sum(psi_p**2) + np.sum(psi_m**2)) * dx
    assert abs(total - 1.0) < 1e-6
    # sign convention: positive weight on the positive half-line
    assert np.sum(psi_p[grid > 0]) > 0.0
    # the dominant peak sits at finite displacement, inside the bare g' scale
    gp = derive_scales(model).g_prime
    peak = abs(grid[int(np.argmax(np.abs(psi_p)))])
    assert 0.5 < peak < gp


# ---------------------------------------------------------------------------
# frozen regression table


def test_reference_table_reproduced():
    header, rows = load_reference()
    omega = float(header["omega"])
    Omega = float(header["Omega"])
    tol = float(header["tol"])
    assert len(rows) == 4
    for row in rows:
        model = ModelParams(omega=omega, g=float(row["g"]), Omega=Omega)
        res = ground_state(model, EDConfig(tol=tol))
        assert res.cutoff_used == int(row["cutoff_used"])
        assert abs(res.energy - float(row["energy"])) < 1e-12
        assert abs(res.sigma_x - float(row["sigma_x"])) < 1e-9
        assert abs(res.corr - float(row["corr"])) < 1e-9
        assert abs(res.nphot - float(row["nphot"])) < 1e-9
        assert abs(res.parity - float(row["parity"])) < 1e-9
        assert float(row["doubling_delta"]) < 1e-10
