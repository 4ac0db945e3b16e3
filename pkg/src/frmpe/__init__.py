"""Variational ground states of the quantum Rabi model.

The package implements a frequency-renormalized multipolaron expansion: the
ground state is expanded over displaced Gaussian wavepackets whose widths
and displacements are variational parameters, with closed-form matrix
elements, a two-stage derivative-free optimizer, and exact diagonalization
plus an adaptive-quadrature oracle as independent benchmarks.
"""

from ._version import __version__
from .errors import (
    AllRestartsFailedError,
    DegenerateBasisError,
    DomainError,
    FrmpeError,
    IllConditionedError,
    NonConvergedError,
)
from .exactdiag import EDConfig, EDResult, build_hamiltonian, ed_wavefunction, ground_state
from .kernels import AnsatzMode, AnsatzState, KernelBlock, Polaron, energy, normalize, observables, wavefunction
from .model import CouplingScales, ModelParams, coupling_ratio, derive_scales
from .optimize import (
    AnnealSchedule,
    OptimizeSpec,
    PatternConfig,
    Strategy,
    VariationalResult,
    anneal,
    default_schedule,
    grow_state,
    optimize,
    pattern_search,
    solve_linear_coeffs,
)
from .quadrature import ElementKind, ObservableKind, QuadSpec, quad_element, quad_observable
from .sweep import (
    GridSpec,
    MethodSpec,
    SweepSpec,
    canonical_methods,
    dump_wavefunction,
    run_sweep,
    validate_kernels,
)

__all__ = [
    "__version__",
    "FrmpeError",
    "DomainError",
    "DegenerateBasisError",
    "IllConditionedError",
    "NonConvergedError",
    "AllRestartsFailedError",
    "ModelParams",
    "CouplingScales",
    "derive_scales",
    "coupling_ratio",
    "AnsatzMode",
    "Polaron",
    "AnsatzState",
    "KernelBlock",
    "energy",
    "observables",
    "wavefunction",
    "normalize",
    "QuadSpec",
    "ElementKind",
    "ObservableKind",
    "quad_element",
    "quad_observable",
    "EDConfig",
    "EDResult",
    "build_hamiltonian",
    "ground_state",
    "ed_wavefunction",
    "AnnealSchedule",
    "PatternConfig",
    "Strategy",
    "OptimizeSpec",
    "VariationalResult",
    "default_schedule",
    "solve_linear_coeffs",
    "anneal",
    "pattern_search",
    "optimize",
    "grow_state",
    "MethodSpec",
    "SweepSpec",
    "GridSpec",
    "canonical_methods",
    "run_sweep",
    "dump_wavefunction",
    "validate_kernels",
]
