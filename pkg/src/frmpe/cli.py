"""Command-line front end for batch operation.

Subcommands
    sweep         coupling sweep over g/g_c with ED benchmark columns
    wavefunction  real-space Psi+ comparison table at one coupling point
    validate      closed-form kernels vs quadrature oracle on random draws
    ed            single-point exact diagonalization
    optimize      single-point variational run with full diagnostics

Exit codes
    0  success
    1  validation failure (validate found deviations beyond tolerance)
    2  exact diagonalization failed to converge
    3  optimizer: all restarts failed
    4  bad arguments or configuration

Config files (--config PATH) hold key=value lines mirroring the long flag
names with '-' replaced by '_' (e.g. ratio_min=0.9); '#' starts a comment.
Values given on the command line override the file.

Optimizer traces (optimize --trace PATH, '-' for stdout) are text tables
with one 'restart phase stage best_energy' line per annealing stage or
pattern-search mesh step, floats in shortest round-trip form.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import sys

from ._version import __version__
from .errors import AllRestartsFailedError, DomainError, FrmpeError, NonConvergedError
from .exactdiag import EDConfig, ground_state
from .kernels import AnsatzMode
from .model import ModelParams, derive_scales
from .optimize import OptimizeSpec, Strategy, optimize
from .sweep import (
    GridSpec,
    MethodSpec,
    SweepSpec,
    canonical_methods,
    dump_wavefunction,
    emit_sweep_plot,
    emit_wavefunction_plot,
    run_sweep,
    validate_kernels,
    write_sweep_csv,
    write_sweep_json,
    write_wavefunction_csv,
)

_FMT = repr  # shortest round-trip float formatting


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; the contract here is 4."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(4, f"{self.prog}: error: {message}\n")


def _add_point_flags(p, require_coupling: bool = True):
    p.add_argument("--omega", type=float, required=True, help="oscillator frequency")
    p.add_argument("--Omega", type=float, default=1.0, help="qubit level splitting (default 1)")
    grp = p.add_mutually_exclusive_group(required=require_coupling)
    grp.add_argument("--g", type=float, help="coupling strength")
    grp.add_argument("--ratio", type=float, help="coupling as g/g_c")


def _point_model(args) -> ModelParams:
    if args.g is not None:
        return ModelParams(omega=args.omega, g=args.g, Omega=args.Omega)
    probe = ModelParams(omega=args.omega, g=0.0, Omega=args.Omega)
    return ModelParams(omega=args.omega, g=args.ratio * derive_scales(probe).g_c, Omega=args.Omega)


@contextlib.contextmanager
def _out_stream(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def _emit_mapping(pairs, fmt: str, fh) -> None:
    if fmt == "json":
        json.dump(dict(pairs), fh, indent=2, sort_keys=True)
        fh.write("\n")
    else:
        for k, v in pairs:
            fh.write(f"{k}={v}\n")


def _cmd_sweep(args) -> int:
    methods = tuple(MethodSpec.parse(m) for m in args.method) if args.method else canonical_methods()
    spec = SweepSpec(
        omega=args.omega,
        Omega=args.Omega,
        ratio_min=args.ratio_min,
        ratio_max=args.ratio_max,
        points=args.points,
        methods=methods,
        ed=not args.no_ed,
        seed=args.seed,
        restarts=args.restarts,
        ed_tol=args.ed_tol,
    )
    rows = run_sweep(spec, jobs=args.jobs)
    with _out_stream(args.out) as fh:
        if args.format == "json":
            write_sweep_json(rows, spec, fh)
        else:
            write_sweep_csv(rows, spec, fh)
    if args.plot_script:
        csv_name = args.out if args.out and args.out != "-" else "sweep.csv"
        with open(args.plot_script, "w") as fh:
            fh.write(emit_sweep_plot(csv_name, spec))
    return 0


def _cmd_wavefunction(args) -> int:
    model = _point_model(args)
    methods = (
        tuple(MethodSpec.parse(m) for m in args.method)
        if args.method
        else (
            MethodSpec(AnsatzMode.FRMPE, 2),
            MethodSpec(AnsatzMode.FRMPE, 4),
            MethodSpec(AnsatzMode.CSE, 2),
        )
    )
    dump = dump_wavefunction(
        omega=model.omega,
        g=model.g,
        methods=methods,
        Omega=model.Omega,
        grid_spec=GridSpec(x_min=args.grid_min, x_max=args.grid_max, points=args.grid_points),
        seed=args.seed,
        restarts=args.restarts,
        ed_tol=args.ed_tol,
    )
    with _out_stream(args.out) as fh:
        write_wavefunction_csv(dump, fh)
    if args.plot_script:
        csv_name = args.out if args.out and args.out != "-" else "wavefunction.csv"
        with open(args.plot_script, "w") as fh:
            fh.write(emit_wavefunction_plot(csv_name, dump))
    return 0


def _cmd_validate(args) -> int:
    report = validate_kernels(args.draws, seed=args.seed, tol=args.tol)
    with _out_stream(args.out) as fh:
        for line in report.lines():
            fh.write(line + "\n")
    return 0 if report.passed else 1


def _cmd_ed(args) -> int:
    model = _point_model(args)
    config = EDConfig(tol=args.ed_tol) if args.max_cutoff is None else EDConfig(
        tol=args.ed_tol, max_cutoff=args.max_cutoff
    )
    res = ground_state(model, config)
    pairs = [
        ("omega", _FMT(model.omega)),
        ("Omega", _FMT(model.Omega)),
        ("g", _FMT(model.g)),
        ("energy", _FMT(res.energy)),
        ("gap", _FMT(res.gap)),
        ("sigma_x", _FMT(res.sigma_x)),
        ("corr", _FMT(res.corr)),
        ("nphot", _FMT(res.nphot)),
        ("parity", _FMT(res.parity)),
        ("cutoff_used", str(res.cutoff_used)),
    ]
    with _out_stream(args.out) as fh:
        _emit_mapping(pairs, args.format, fh)
    return 0


def _cmd_optimize(args) -> int:
    model = _point_model(args)
    spec = OptimizeSpec(
        n_polarons=args.n_polarons,
        mode=AnsatzMode(args.mode),
        strategy=Strategy(args.strategy),
        restarts=args.restarts,
        seed=args.seed,
    )
    trace = [] if args.trace else None
    res = optimize(model, spec, trace=trace)
    sigma_x, corr, nphot = res.observables
    pairs = [
        ("omega", _FMT(model.omega)),
        ("Omega", _FMT(model.Omega)),
        ("g", _FMT(model.g)),
        ("mode", spec.mode.value),
        ("strategy", spec.strategy.value),
        ("n_polarons", str(spec.n_polarons)),
        ("energy", _FMT(res.energy)),
        ("sigma_x", _FMT(sigma_x)),
        ("corr", _FMT(corr)),
        ("nphot", _FMT(nphot)),
        ("evaluations", str(res.evaluations)),
        ("restarts_used", str(res.restarts_used)),
        ("best_restart", str(res.best_restart)),
        ("seed", str(res.seed)),
    ]
    for i, (c, p) in enumerate(zip(res.state.coeffs, res.state.polarons)):
        pairs += [(f"c_{i}", _FMT(c)), (f"xi_{i}", _FMT(p.xi)), (f"zeta_{i}", _FMT(p.zeta))]
    with _out_stream(args.out) as fh:
        _emit_mapping(pairs, args.format, fh)
    if args.trace:
        with _out_stream(args.trace) as fh:
            fh.write("restart phase stage best_energy\n")
            for restart, phase, stage, energy in trace:
                fh.write(f"{restart} {phase} {_FMT(float(stage))} {_FMT(energy)}\n")
    return 0


_CONFIG_CASTS = {
    "omega": float,
    "Omega": float,
    "g": float,
    "ratio": float,
    "ratio_min": float,
    "ratio_max": float,
    "points": int,
    "n_polarons": int,
    "mode": str,
    "strategy": str,
    "restarts": int,
    "seed": int,
    "ed_tol": float,
    "max_cutoff": int,
    "tol": float,
    "out": str,
    "format": str,
    "grid_min": float,
    "grid_max": float,
    "grid_points": int,
    "jobs": int,
    "draws": int,
    "method": lambda v: v.split(),
    "no_ed": lambda v: v.strip().lower() in ("1", "true", "yes"),
    "plot_script": str,
    "trace": str,
}


def _load_config(path: str) -> dict:
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise DomainError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                key = key.replace("-", "_")
                if key not in _CONFIG_CASTS:
                    raise DomainError(f"{path}:{lineno}: unknown config key {key!r}")
                try:
                    values[key] = _CONFIG_CASTS[key](value)
                except ValueError as exc:
                    raise DomainError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    except OSError as exc:
        raise DomainError(f"cannot read config file {path}: {exc}") from None
    return values


def _scan_config_path(argv) -> str:
    for i, tok in enumerate(argv):
        if tok == "--config":
            if i + 1 >= len(argv):
                raise DomainError("--config needs a file path")
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def build_parser():
    parser = _Parser(prog="frmpe", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"frmpe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subparsers = []

    p = sub.add_parser("sweep", help="coupling sweep with ED benchmark columns")
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--Omega", type=float, default=1.0)
    p.add_argument("--ratio-min", type=float, default=0.8)
    p.add_argument("--ratio-max", type=float, default=1.2)
    p.add_argument("--points", type=int, default=21)
    p.add_argument(
        "--method",
        action="append",
        metavar="MODE:N[:STRATEGY]",
        help="variational method column, repeatable (default: frmpe:2 frmpe:4 cse:4 cse:6)",
    )
    p.add_argument("--no-ed", action="store_true", help="skip the ED benchmark columns")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--ed-tol", type=float, default=1e-10)
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--plot-script", help="also write a gnuplot script to this path")
    p.set_defaults(func=_cmd_sweep)
    subparsers.append(p)

    p = sub.add_parser("wavefunction", help="real-space Psi+ table at one point")
    _add_point_flags(p)
    p.add_argument("--method", action="append", metavar="MODE:N[:STRATEGY]",
                   help="repeatable (default: frmpe:2 frmpe:4 cse:2)")
    p.add_argument("--grid-min", type=float, default=-15.0)
    p.add_argument("--grid-max", type=float, default=15.0)
    p.add_argument("--grid-points", type=int, default=601)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--ed-tol", type=float, default=1e-10)
    p.add_argument("--out", default="-")
    p.add_argument("--plot-script", help="also write a gnuplot script to this path")
    p.set_defaults(func=_cmd_wavefunction)
    subparsers.append(p)

    p = sub.add_parser("validate", help="kernels vs quadrature oracle")
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_validate)
    subparsers.append(p)

    p = sub.add_parser("ed", help="single-point exact diagonalization")
    _add_point_flags(p)
    p.add_argument("--ed-tol", type=float, default=1e-10)
    p.add_argument("--max-cutoff", type=int, default=None, help="largest Fock cutoff to try")
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=("keyval", "json"), default="keyval")
    p.set_defaults(func=_cmd_ed)
    subparsers.append(p)

    p = sub.add_parser("optimize", help="single-point variational run")
    _add_point_flags(p)
    p.add_argument("--n-polarons", type=int, required=True)
    p.add_argument("--mode", choices=tuple(m.value for m in AnsatzMode), default="frmpe")
    p.add_argument("--strategy", choices=tuple(s.value for s in Strategy), default="nested")
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=("keyval", "json"), default="keyval")
    p.add_argument("--trace", metavar="PATH", help="write an optimizer trace table ('-' for stdout)")
    p.set_defaults(func=_cmd_optimize)
    subparsers.append(p)

    for sp in subparsers:
        sp.add_argument("--config", metavar="PATH", help="key=value config file; flags override it")
    return parser, subparsers


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    try:
        config_path = _scan_config_path(argv)
        if config_path is not None:
            values = _load_config(config_path)
            for sp in subparsers:
                sp.set_defaults(**values)
                # a value supplied by the config file satisfies a required
                # flag; explicit flags still override via parse_args
                for action in sp._actions:
                    if action.required and action.dest in values:
                        action.required = False
                for group in sp._mutually_exclusive_groups:
                    if group.required and any(
                        a.dest in values for a in group._group_actions
                    ):
                        group.required = False
        args = parser.parse_args(argv)
        return args.func(args)
    except NonConvergedError as exc:
        print(f"frmpe: exact diagonalization did not converge: {exc}", file=sys.stderr)
        return 2
    except AllRestartsFailedError as exc:
        print(f"frmpe: optimization failed: {exc}", file=sys.stderr)
        return 3
    except DomainError as exc:
        print(f"frmpe: bad arguments: {exc}", file=sys.stderr)
        return 4
    except FrmpeError as exc:
        print(f"frmpe: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
