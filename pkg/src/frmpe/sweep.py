"""Batch engine: coupling sweeps, wavefunction dumps, kernel validation.

A sweep evaluates every requested variational method plus exact
diagonalization on a grid of coupling ratios g/g_c and assembles one row
per grid point, including the benchmark error columns

    dE/omega = (E - E_ED) / omega,    d<O> = <O> - <O>_ED.

Sweep points are mutually independent: all seeding is derived from
(spec.seed, point index, method index), so results are identical whether
points run serially or in a process pool, and reruns of the same spec are
reproducible bit for bit. Within one point, methods of the same mode and
strategy are optimized in order of increasing polaron number, each warm
started from the previous optimum extended by near-silent polarons; this
enforces the variational ordering E(N+k) <= E(N) structurally.

Output is CSV with a '#'-prefixed key=value header block recording the full
sweep spec (an optional JSON mirror carries the same content), all floats
written in shortest round-trip form. Per-point failures are recorded in
status columns; they never abort a sweep.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from ._version import __version__
from .errors import DomainError, FrmpeError, NonConvergedError
from .exactdiag import EDConfig, ed_wavefunction, ground_state
from .kernels import (
    AnsatzMode,
    Polaron,
    h_plus_element,
    kinetic_element,
    moment_x,
    moment_x2,
    overlap_cross,
    overlap_same,
    wavefunction,
)
from .model import ModelParams, derive_scales
from .optimize import OptimizeSpec, Strategy, grow_state, optimize
from .quadrature import DEFAULT_SPEC, ElementKind, QuadSpec, quad_element

__all__ = [
    "MethodSpec",
    "SweepSpec",
    "MethodResult",
    "EDSummary",
    "SweepRow",
    "GridSpec",
    "WavefunctionDump",
    "ValidationReport",
    "canonical_methods",
    "run_sweep",
    "dump_wavefunction",
    "validate_kernels",
    "write_sweep_csv",
    "write_sweep_json",
    "write_wavefunction_csv",
    "emit_sweep_plot",
    "emit_wavefunction_plot",
]

_NAN = float("nan")


def _fmt(x: float) -> str:
    """Shortest round-trip decimal form, locale-independent."""
    return repr(float(x))


@dataclass(frozen=True)
class MethodSpec:
    """One variational method column: ansatz mode, polaron count, strategy."""

    mode: AnsatzMode
    n_polarons: int
    strategy: Strategy = Strategy.NESTED

    def __post_init__(self):
        if self.n_polarons < 1:
            raise DomainError(f"method needs at least one polaron, got {self.n_polarons}")

    @property
    def label(self) -> str:
        base = f"{self.mode.value}{self.n_polarons}"
        return base if self.strategy is Strategy.NESTED else f"{base}_full"

    def encode(self) -> str:
        return f"{self.mode.value}:{self.n_polarons}:{self.strategy.value}"

    @classmethod
    def parse(cls, text: str) -> "MethodSpec":
        """Parse 'mode:N' or 'mode:N:strategy', e.g. 'frmpe:4' or 'cse:2:full'."""
        parts = text.strip().lower().split(":")
        if len(parts) not in (2, 3):
            raise DomainError(f"bad method spec {text!r}; want mode:N[:strategy]")
        try:
            mode = AnsatzMode(parts[0])
            n = int(parts[1])
            strategy = Strategy(parts[2]) if len(parts) == 3 else Strategy.NESTED
        except ValueError as exc:
            raise DomainError(f"bad method spec {text!r}: {exc}") from None
        return cls(mode=mode, n_polarons=n, strategy=strategy)


def canonical_methods() -> tuple:
    """The benchmark method set: FRMPE N=2,4 against CSE N=4,6."""
    return (
        MethodSpec(AnsatzMode.FRMPE, 2),
        MethodSpec(AnsatzMode.FRMPE, 4),
        MethodSpec(AnsatzMode.CSE, 4),
        MethodSpec(AnsatzMode.CSE, 6),
    )


@dataclass(frozen=True)
class SweepSpec:
    """Grid of coupling ratios plus the methods to run at each point."""

    omega: float
    Omega: float = 1.0
    ratio_min: float = 0.8
    ratio_max: float = 1.2
    points: int = 21
    methods: tuple = ()
    ed: bool = True
    seed: int = 0
    restarts: int = 4
    ed_tol: float = 1e-10

    def __post_init__(self):
        if not self.methods:
            object.__setattr__(self, "methods", canonical_methods())
        else:
            object.__setattr__(self, "methods", tuple(self.methods))
        if self.points < 1:
            raise DomainError(f"need at least one grid point, got {self.points}")
        if not (self.ratio_min <= self.ratio_max):
            raise DomainError(f"need ratio_min <= ratio_max, got {self.ratio_min} > {self.ratio_max}")
        if self.ratio_min < 0.0:
            raise DomainError(f"coupling ratios must be nonnegative, got {self.ratio_min}")
        if self.restarts < 1:
            raise DomainError(f"need at least one restart, got {self.restarts}")

    def ratios(self) -> np.ndarray:
        if self.points == 1:
            return np.array([self.ratio_min])
        return np.linspace(self.ratio_min, self.ratio_max, self.points)


@dataclass(frozen=True)
class MethodResult:
    """Per-method, per-point outcome; numeric fields are nan on failure."""

    status: str
    energy: float
    sigma_x: float
    corr: float
    nphot: float


@dataclass(frozen=True)
class EDSummary:
    status: str
    energy: float
    sigma_x: float
    corr: float
    nphot: float
    gap: float
    cutoff_used: int


@dataclass(frozen=True)
class SweepRow:
    omega: float
    Omega: float
    g: float
    g_over_gc: float
    ed: EDSummary
    methods: tuple  # (label, MethodResult) pairs in spec order


def _method_seed(seed: int, point_index: int, method_index: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(point_index, method_index))
    return int(ss.generate_state(1)[0])


def _run_methods(model: ModelParams, spec: SweepSpec, point_index: int) -> list:
    """Optimize every method at one model point, chaining within each
    (mode, strategy) group by increasing N."""
    order = sorted(
        range(len(spec.methods)),
        key=lambda i: (spec.methods[i].mode.value, spec.methods[i].strategy.value, spec.methods[i].n_polarons),
    )
    results = [None] * len(spec.methods)
    prev = {}
    for mi in order:
        meth = spec.methods[mi]
        ospec = OptimizeSpec(
            n_polarons=meth.n_polarons,
            mode=meth.mode,
            strategy=meth.strategy,
            restarts=spec.restarts,
            seed=_method_seed(spec.seed, point_index, mi),
        )
        key = (meth.mode, meth.strategy)
        init_state = None
        if key in prev and prev[key].state.n_polarons <= meth.n_polarons:
            init_state = grow_state(prev[key].state, meth.n_polarons)
        try:
            res = optimize(model, ospec, init_state=init_state)
        except FrmpeError as exc:
            results[mi] = MethodResult(f"failed:{type(exc).__name__}", _NAN, _NAN, _NAN, _NAN)
            continue
        prev[key] = res
        sigma_x, corr, nphot = res.observables
        results[mi] = MethodResult("ok", res.energy, sigma_x, corr, nphot)
    return results


def _run_ed(model: ModelParams, spec: SweepSpec) -> EDSummary:
    try:
        res = ground_state(model, EDConfig(tol=spec.ed_tol))
    except NonConvergedError as exc:
        best = exc.best
        if best is not None:
            return EDSummary(
                f"failed:{type(exc).__name__}", best.energy, best.sigma_x, best.corr,
                best.nphot, best.gap, best.cutoff_used,
            )
        return EDSummary(f"failed:{type(exc).__name__}", _NAN, _NAN, _NAN, _NAN, _NAN, 0)
    return EDSummary("ok", res.energy, res.sigma_x, res.corr, res.nphot, res.gap, res.cutoff_used)


def _compute_point(spec: SweepSpec, point_index: int) -> SweepRow:
    ratio = float(spec.ratios()[point_index])
    probe = ModelParams(omega=spec.omega, g=0.0, Omega=spec.Omega)
    g = ratio * derive_scales(probe).g_c
    model = ModelParams(omega=spec.omega, g=g, Omega=spec.Omega)
    ed = _run_ed(model, spec) if spec.ed else None
    method_results = _run_methods(model, spec, point_index)
    return SweepRow(
        omega=spec.omega,
        Omega=spec.Omega,
        g=g,
        g_over_gc=ratio,
        ed=ed,
        methods=tuple((m.label, r) for m, r in zip(spec.methods, method_results)),
    )


def run_sweep(spec: SweepSpec, jobs: int = None) -> list:
    """Compute all sweep rows, in grid order.

    jobs > 1 distributes points over a process pool; the result is
    identical to a serial run because points are independent and all
    seeding is positional. Default pool size is the available core count.
    """
    if jobs is None:
        jobs = os.cpu_count() or 1
    indices = range(spec.points)
    if jobs <= 1 or spec.points == 1:
        return [_compute_point(spec, i) for i in indices]
    with concurrent.futures.ProcessPoolExecutor(max_workers=min(jobs, spec.points)) as pool:
        return list(pool.map(_compute_point, [spec] * spec.points, indices))


def _spec_header_items(spec: SweepSpec) -> list:
    return [
        ("omega", _fmt(spec.omega)),
        ("Omega", _fmt(spec.Omega)),
        ("ratio_min", _fmt(spec.ratio_min)),
        ("ratio_max", _fmt(spec.ratio_max)),
        ("points", str(spec.points)),
        ("methods", " ".join(m.encode() for m in spec.methods)),
        ("ed", "true" if spec.ed else "false"),
        ("seed", str(spec.seed)),
        ("restarts", str(spec.restarts)),
        ("ed_tol", _fmt(spec.ed_tol)),
    ]


def _sweep_columns(spec: SweepSpec) -> list:
    cols = ["version", "omega", "Omega", "g", "g_over_gc"]
    if spec.ed:
        cols += ["ed_status", "ed_cutoff", "ed_gap", "ed_energy", "ed_sigma_x", "ed_corr", "ed_nphot"]
    for m in spec.methods:
        L = m.label
        cols += [f"{L}_status", f"{L}_energy", f"{L}_sigma_x", f"{L}_corr", f"{L}_nphot"]
        if spec.ed:
            cols += [f"{L}_dE_per_omega", f"{L}_dsigma_x", f"{L}_dcorr", f"{L}_dnphot"]
    return cols


def _row_cells(row: SweepRow, spec: SweepSpec) -> list:
    cells = [__version__, _fmt(row.omega), _fmt(row.Omega), _fmt(row.g), _fmt(row.g_over_gc)]
    ed_ok = spec.ed and row.ed.status == "ok"
    if spec.ed:
        cells += [
            row.ed.status,
            str(row.ed.cutoff_used),
            _fmt(row.ed.gap),
            _fmt(row.ed.energy),
            _fmt(row.ed.sigma_x),
            _fmt(row.ed.corr),
            _fmt(row.ed.nphot),
        ]
    for label, r in row.methods:
        cells += [r.status, _fmt(r.energy), _fmt(r.sigma_x), _fmt(r.corr), _fmt(r.nphot)]
        if spec.ed:
            if ed_ok and r.status == "ok":
                cells += [
                    _fmt((r.energy - row.ed.energy) / row.omega),
                    _fmt(r.sigma_x - row.ed.sigma_x),
                    _fmt(r.corr - row.ed.corr),
                    _fmt(r.nphot - row.ed.nphot),
                ]
            else:
                cells += [_fmt(_NAN)] * 4
    return cells


def write_sweep_csv(rows, spec: SweepSpec, fh) -> None:
    fh.write("# frmpe-sweep format=1\n")
    fh.write(f"# version={__version__}\n")
    for k, v in _spec_header_items(spec):
        fh.write(f"# {k}={v}\n")
    fh.write(",".join(_sweep_columns(spec)) + "\n")
    for row in rows:
        fh.write(",".join(_row_cells(row, spec)) + "\n")


def _row_dict(row: SweepRow, spec: SweepSpec) -> dict:
    return dict(zip(_sweep_columns(spec), _row_cells(row, spec)))


def write_sweep_json(rows, spec: SweepSpec, fh) -> None:
    doc = {
        "kind": "frmpe-sweep",
        "format": 1,
        "version": __version__,
        "spec": dict(_spec_header_items(spec)),
        "rows": [_row_dict(row, spec) for row in rows],
    }
    json.dump(doc, fh, indent=2, sort_keys=True)
    fh.write("\n")


@dataclass(frozen=True)
class GridSpec:
    """Uniform real-space grid; symmetric bounds produce a grid that mirrors
    bitwise around zero (endpoints exact)."""

    x_min: float = -15.0
    x_max: float = 15.0
    points: int = 601

    def __post_init__(self):
        if self.points < 1:
            raise DomainError(f"need at least one grid point, got {self.points}")
        if not (self.x_min < self.x_max) and self.points > 1:
            raise DomainError(f"need x_min < x_max, got {self.x_min}, {self.x_max}")

    def build(self) -> np.ndarray:
        if self.points == 1:
            return np.array([self.x_min])
        if self.x_min == -self.x_max and self.x_max > 0.0:
            step = (self.x_max - self.x_min) / (self.points - 1)
            if self.points % 2 == 1:
                half = np.linspace(step, self.x_max, self.points // 2)
                return np.concatenate([-half[::-1], [0.0], half])
            half = np.linspace(0.5 * step, self.x_max, self.points // 2)
            return np.concatenate([-half[::-1], half])
        return np.linspace(self.x_min, self.x_max, self.points)


@dataclass(frozen=True)
class WavefunctionDump:
    """Psi+ branches of ED and every method at one coupling point."""

    omega: float
    Omega: float
    g: float
    g_over_gc: float
    grid: np.ndarray
    ed_status: str
    ed_psi: np.ndarray
    methods: tuple  # (label, status, psi, dpsi); psi/dpsi are nan arrays on failure


def dump_wavefunction(
    omega: float,
    g: float,
    methods,
    Omega: float = 1.0,
    grid_spec: GridSpec = GridSpec(),
    seed: int = 0,
    restarts: int = 4,
    ed_tol: float = 1e-10,
) -> WavefunctionDump:
    """Optimize each method at one point and tabulate Psi+ against ED.

    Reuses the sweep seeding/chaining scheme at point index 0, so a
    wavefunction dump matches the states a one-point sweep would produce.
    """
    model = ModelParams(omega=omega, g=g, Omega=Omega)
    ratio = g / derive_scales(model).g_c
    grid = grid_spec.build()
    nan_grid = np.full(grid.size, _NAN)
    sub = SweepSpec(
        omega=omega, Omega=Omega, ratio_min=ratio, ratio_max=ratio, points=1,
        methods=tuple(methods), ed=True, seed=seed, restarts=restarts, ed_tol=ed_tol,
    )
    try:
        ed_res = ground_state(model, EDConfig(tol=ed_tol))
        ed_psi, _ = ed_wavefunction(ed_res, grid)
        ed_status = "ok"
    except NonConvergedError as exc:
        ed_psi = nan_grid
        ed_status = f"failed:{type(exc).__name__}"

    order = sorted(
        range(len(sub.methods)),
        key=lambda i: (sub.methods[i].mode.value, sub.methods[i].strategy.value, sub.methods[i].n_polarons),
    )
    entries = [None] * len(sub.methods)
    prev = {}
    for mi in order:
        meth = sub.methods[mi]
        ospec = OptimizeSpec(
            n_polarons=meth.n_polarons,
            mode=meth.mode,
            strategy=meth.strategy,
            restarts=restarts,
            seed=_method_seed(seed, 0, mi),
        )
        key = (meth.mode, meth.strategy)
        init_state = None
        if key in prev and prev[key].state.n_polarons <= meth.n_polarons:
            init_state = grow_state(prev[key].state, meth.n_polarons)
        try:
            res = optimize(model, ospec, init_state=init_state)
        except FrmpeError as exc:
            entries[mi] = (meth.label, f"failed:{type(exc).__name__}", nan_grid, nan_grid)
            continue
        prev[key] = res
        psi, _ = wavefunction(res.state, model, grid)
        dpsi = psi - ed_psi if ed_status == "ok" else nan_grid
        entries[mi] = (meth.label, "ok", psi, dpsi)
    return WavefunctionDump(
        omega=omega, Omega=Omega, g=g, g_over_gc=ratio, grid=grid,
        ed_status=ed_status, ed_psi=ed_psi, methods=tuple(entries),
    )


def write_wavefunction_csv(dump: WavefunctionDump, fh) -> None:
    fh.write("# frmpe-wavefunction format=1\n")
    fh.write(f"# version={__version__}\n")
    for k, v in (
        ("omega", _fmt(dump.omega)),
        ("Omega", _fmt(dump.Omega)),
        ("g", _fmt(dump.g)),
        ("g_over_gc", _fmt(dump.g_over_gc)),
        ("grid_points", str(dump.grid.size)),
        ("ed_status", dump.ed_status),
        ("methods", " ".join(f"{label}={status}" for label, status, _, _ in dump.methods)),
    ):
        fh.write(f"# {k}={v}\n")
    cols = ["x", "ed_psi_plus"]
    for label, _, _, _ in dump.methods:
        cols += [f"{label}_psi_plus", f"{label}_dpsi_plus"]
    fh.write(",".join(cols) + "\n")
    for k in range(dump.grid.size):
        cells = [_fmt(dump.grid[k]), _fmt(dump.ed_psi[k])]
        for _, _, psi, dpsi in dump.methods:
            cells += [_fmt(psi[k]), _fmt(dpsi[k])]
        fh.write(",".join(cells) + "\n")


_KIND_CLOSED = {
    ElementKind.OVERLAP: lambda pn, pm, gp, model: overlap_same(pn, pm, gp),
    ElementKind.CROSS: lambda pn, pm, gp, model: overlap_cross(pn, pm, gp),
    ElementKind.X: lambda pn, pm, gp, model: moment_x(pn, pm, gp),
    ElementKind.X2: lambda pn, pm, gp, model: moment_x2(pn, pm, gp),
    ElementKind.KINETIC: lambda pn, pm, gp, model: kinetic_element(pn, pm, gp),
    ElementKind.HPLUS: lambda pn, pm, gp, model: h_plus_element(pn, pm, model),
}


@dataclass(frozen=True)
class ValidationReport:
    draws: int
    seed: int
    tol: float
    max_dev: tuple  # (kind name, max abs deviation) pairs
    quad_failures: int
    passed: bool

    def lines(self) -> list:
        out = [f"draws={self.draws}", f"seed={self.seed}", f"tol={_fmt(self.tol)}"]
        out += [f"max_dev_{name}={_fmt(dev)}" for name, dev in self.max_dev]
        out += [f"quad_failures={self.quad_failures}", f"passed={'true' if self.passed else 'false'}"]
        return out


def validate_kernels(
    draws: int, seed: int = 0, tol: float = 1e-9, spec: QuadSpec = DEFAULT_SPEC
) -> ValidationReport:
    """Cross-check every closed-form kernel against quadrature on random draws.

    Draw ranges: xi in [0.05, 5], zeta in [-2, 2], g' in [0, 10]; the model
    is realized as omega = 1, Omega = 1, g = g'/sqrt(2).
    """
    if draws < 1:
        raise DomainError(f"need at least one draw, got {draws}")
    rng = np.random.default_rng(seed)
    worst = {kind: 0.0 for kind in ElementKind}
    quad_failures = 0
    for _ in range(draws):
        pn = Polaron(xi=float(rng.uniform(0.05, 5.0)), zeta=float(rng.uniform(-2.0, 2.0)))
        pm = Polaron(xi=float(rng.uniform(0.05, 5.0)), zeta=float(rng.uniform(-2.0, 2.0)))
        gp = float(rng.uniform(0.0, 10.0))
        model = ModelParams(omega=1.0, g=gp / math.sqrt(2.0), Omega=1.0)
        for kind in ElementKind:
            closed = _KIND_CLOSED[kind](pn, pm, gp, model)
            try:
                numeric = quad_element(kind, pn, pm, model, spec)
            except NonConvergedError:
                quad_failures += 1
                continue
            worst[kind] = max(worst[kind], abs(closed - numeric))
    max_dev = tuple((kind.value, worst[kind]) for kind in ElementKind)
    passed = quad_failures == 0 and all(dev <= tol for _, dev in max_dev)
    return ValidationReport(
        draws=draws, seed=seed, tol=tol, max_dev=max_dev, quad_failures=quad_failures, passed=passed
    )


def emit_sweep_plot(csv_name: str, spec: SweepSpec) -> str:
    """Gnuplot script drawing the energy-error and observable-error panels."""
    labels = [m.label for m in spec.methods]
    lines = [
        "# gnuplot script generated by frmpe; run: gnuplot <this file>",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set key left top",
        "set terminal pngcairo size 1000,700",
        "set xlabel 'g/g_c'",
    ]
    if spec.ed:
        lines += [
            "set output 'sweep_energy_error.png'",
            "set ylabel '|dE|/omega'",
            "set logscale y",
            "plot " + ", \\\n     ".join(
                f"'{csv_name}' using \"g_over_gc\":(abs(column(\"{L}_dE_per_omega\"))) "
                f"with linespoints title '{L}'" for L in labels
            ),
            "unset logscale y",
            "set output 'sweep_observable_error.png'",
            "set ylabel 'observable error vs ED'",
            "plot " + ", \\\n     ".join(
                f"'{csv_name}' using \"g_over_gc\":(abs(column(\"{L}_{obs}\"))) "
                f"with linespoints title '{L} {obs}'"
                for L in labels
                for obs in ("dsigma_x", "dcorr", "dnphot")
            ),
        ]
    lines += [
        "set output 'sweep_observables.png'",
        "set ylabel 'expectation value'",
        "plot " + ", \\\n     ".join(
            [
                f"'{csv_name}' using \"g_over_gc\":(column(\"{L}_{obs}\")) "
                f"with linespoints title '{L} {obs}'"
                for L in labels
                for obs in ("sigma_x", "corr", "nphot")
            ]
            + (
                [
                    f"'{csv_name}' using \"g_over_gc\":(column(\"ed_{obs}\")) "
                    f"with lines title 'ed {obs}'"
                    for obs in ("sigma_x", "corr", "nphot")
                ]
                if spec.ed
                else []
            )
        ),
    ]
    return "\n".join(lines) + "\n"


def emit_wavefunction_plot(csv_name: str, dump: WavefunctionDump) -> str:
    labels = [label for label, _, _, _ in dump.methods]
    lines = [
        "# gnuplot script generated by frmpe; run: gnuplot <this file>",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 1000,700",
        "set xlabel 'x'",
        "set output 'wavefunction.png'",
        "set ylabel 'Psi+(x)'",
        "plot " + ", \\\n     ".join(
            [f"'{csv_name}' using \"x\":(column(\"ed_psi_plus\")) with lines title 'ED'"]
            + [
                f"'{csv_name}' using \"x\":(column(\"{L}_psi_plus\")) with linespoints title '{L}'"
                for L in labels
            ]
        ),
        "set output 'wavefunction_error.png'",
        "set ylabel 'Psi+ - Psi+_ED'",
        "plot " + ", \\\n     ".join(
            f"'{csv_name}' using \"x\":(column(\"{L}_dpsi_plus\")) with linespoints title '{L}'"
            for L in labels
        ),
    ]
    return "\n".join(lines) + "\n"
