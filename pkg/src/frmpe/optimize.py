"""Two-stage variational optimizer: simulated annealing plus pattern search.

The energy landscape is searched with a Metropolis annealer whose proposal
scale shrinks with temperature (rough global stage), and the best-ever point
is then polished with a Hooke-Jeeves pattern search (deterministic local
stage). Both stages are derivative-free.

Two parametrizations are supported:

NESTED (default)
    Stochastic search runs only over the nonlinear parameters — ln(xi_n)
    and zeta_n, so 2N dimensions for FRMPE and N for CSE. At every
    evaluation the linear coefficients C are obtained exactly by solving
    the N-dimensional generalized symmetric eigenproblem

        (h+ - (Omega/2) Sbar) c = E S c,

    whose lowest eigenvalue (plus eps0) is the nested objective.

FULL
    All free parameters are searched directly: C_0 is pinned to 1 and the
    energy is evaluated as a Rayleigh quotient, giving the canonical
    parameter counts 3N - 1 (FRMPE) and 2N - 1 (CSE). Exists to
    cross-validate NESTED against the direct formulation.

Width factors are searched as ln(xi) so positivity is automatic; CSE mode
pins ln(xi) = 0. Proposals that make the Gram matrix of the polaron basis
numerically singular (condition number above 1e12, or a non-positive
eigenvalue) are treated as +infinity and rejected.

Restarts are independent and individually seeded: restart 0 starts from the
classical displaced configuration (zeta alternating in sign with magnitudes
stepping toward 1, xi = 1), later restarts perturb it randomly. Everything
is deterministic given the spec seed. Ties across restarts (within 1e-12)
resolve to the lowest restart index.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AllRestartsFailedError,
    DomainError,
    FrmpeError,
    IllConditionedError,
)
from .kernels import (
    AnsatzMode,
    AnsatzState,
    Polaron,
    energy as state_energy,
    normalize,
    observables,
    plus_branch_weight,
)
from .model import ModelParams, derive_scales

try:
    from numba import njit
except ImportError:  # degrade to interpreted kernels, same numerics
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap

__all__ = [
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
    "n_parameters",
]

COND_LIMIT = 1e12
TIE_BREAK = 1e-12


@dataclass(frozen=True)
class AnnealSchedule:
    """Metropolis temperature ladder.

    t_init, t_final : temperature bounds (energy units), 0 < t_final < t_init
    cooling         : multiplicative factor per stage, in (0, 1)
    steps_per_stage : proposals per temperature stage
    proposal_scale  : initial proposal half-width per parameter; shrinks
                      with sqrt(t / t_init) as the ladder cools
    """

    t_init: float
    t_final: float
    cooling: float = 0.95
    steps_per_stage: int = 200
    proposal_scale: float = 0.2

    def __post_init__(self):
        if not (0.0 < self.t_final < self.t_init):
            raise DomainError(f"need 0 < t_final < t_init, got {self.t_final}, {self.t_init}")
        if not (0.0 < self.cooling < 1.0):
            raise DomainError(f"cooling must lie in (0, 1), got {self.cooling}")
        if self.steps_per_stage < 1:
            raise DomainError(f"steps_per_stage must be >= 1, got {self.steps_per_stage}")
        if not (self.proposal_scale > 0.0):
            raise DomainError(f"proposal_scale must be positive, got {self.proposal_scale}")


def default_schedule(model: ModelParams) -> AnnealSchedule:
    """Schedule scaled to the oscillator energy: landscape features near the
    crossover vary on the scale of omega."""
    return AnnealSchedule(t_init=model.omega, t_final=1e-8 * model.omega)


@dataclass(frozen=True)
class PatternConfig:
    """Hooke-Jeeves mesh control: start size, termination size, contraction."""

    step_init: float = 0.1
    step_min: float = 1e-10
    shrink: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.step_min < self.step_init):
            raise DomainError(f"need 0 < step_min < step_init, got {self.step_min}, {self.step_init}")
        if not (0.0 < self.shrink < 1.0):
            raise DomainError(f"shrink must lie in (0, 1), got {self.shrink}")


class Strategy(enum.Enum):
    NESTED = "nested"
    FULL = "full"


@dataclass(frozen=True)
class OptimizeSpec:
    """What to optimize: polaron count, ansatz mode, strategy, restarts, seed."""

    n_polarons: int
    mode: AnsatzMode = AnsatzMode.FRMPE
    strategy: Strategy = Strategy.NESTED
    restarts: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.n_polarons < 1:
            raise DomainError(f"need at least one polaron, got {self.n_polarons}")
        if self.restarts < 1:
            raise DomainError(f"need at least one restart, got {self.restarts}")


@dataclass(frozen=True)
class VariationalResult:
    """Optimized variational ground state.

    energy       : variational energy of `state` (exactly energy(state, model))
    state        : normalized AnsatzState at the optimum
    observables  : (sigma_x, corr, nphot) of `state`
    evaluations  : total objective evaluations across all pipelines
    restarts_used: pipelines actually run (restarts, plus one if warm-started)
    best_restart : index of the winning pipeline
    seed         : seed the run was keyed on
    """

    energy: float
    state: AnsatzState
    observables: tuple
    evaluations: int
    restarts_used: int
    best_restart: int
    seed: int


def n_parameters(spec: OptimizeSpec) -> int:
    """Dimension of the search space for a given spec."""
    N = spec.n_polarons
    if spec.strategy is Strategy.FULL:
        return 3 * N - 1 if spec.mode is AnsatzMode.FRMPE else 2 * N - 1
    return 2 * N if spec.mode is AnsatzMode.FRMPE else N


@njit(cache=True)
def _nested_core(xis, zetas, gp, omega, Omega, eps0):
    """Kernel assembly plus exact linear-coefficient solve.

    Returns (energy, coeffs, ok); ok = False flags a numerically singular
    or non-finite Gram matrix, in which case energy is +inf.
    """
    N = xis.shape[0]
    S = np.empty((N, N))
    Hm = np.empty((N, N))
    finite = True
    for n in range(N):
        for m in range(N):
            xn = xis[n]
            xm = xis[m]
            zn = zetas[n]
            zm = zetas[m]
            P = xn + xm
            pref = math.sqrt(2.0) * (xn * xm / (P * P)) ** 0.25
            s = pref * math.exp(-((zn - zm) ** 2) * gp * gp * xn * xm / (2.0 * P))
            sbar = pref * math.exp(-((zn + zm) ** 2) * gp * gp * xn * xm / (2.0 * P))
            W = xn * zn + xm * zm
            x1 = s * (-W / P) * gp
            x2 = s * (1.0 / P + (W * gp / P) ** 2)
            D = -0.5 * xm
            E = -gp * xm * zm
            h = 0.5 * omega * (
                (1.0 - 4.0 * D * D) * x2 + (2.0 * gp - 4.0 * D * E) * x1 + (gp * gp - E * E - 2.0 * D) * s
            )
            val = h - 0.5 * Omega * sbar
            if not (math.isfinite(s) and math.isfinite(val)):
                finite = False
            S[n, m] = s
            Hm[n, m] = val
    if not finite:
        return math.inf, np.zeros(N), False
    w = np.linalg.eigvalsh(S)
    if w[0] <= 0.0 or w[N - 1] > COND_LIMIT * w[0]:
        return math.inf, np.zeros(N), False
    L = np.linalg.cholesky(S)
    # A = L^-1 Hm L^-T via two triangular solves
    Y = np.empty((N, N))
    for j in range(N):
        for i in range(N):
            acc = Hm[i, j]
            for k in range(i):
                acc -= L[i, k] * Y[k, j]
            Y[i, j] = acc / L[i, i]
    A = np.empty((N, N))
    for j in range(N):
        for i in range(N):
            acc = Y[j, i]
            for k in range(i):
                acc -= L[i, k] * A[j, k]
            A[j, i] = acc / L[i, i]
    A = 0.5 * (A + A.T)
    w2, V = np.linalg.eigh(A)
    # back-substitute c = L^-T y, normalized so c.S.c = 1
    y = V[:, 0]
    c = np.empty(N)
    for i in range(N - 1, -1, -1):
        acc = y[i]
        for k in range(i + 1, N):
            acc -= L[k, i] * c[k]
        c[i] = acc / L[i, i]
    return w2[0] + eps0, c, True


@njit(cache=True)
def _full_core(c, xis, zetas, gp, omega, Omega, eps0):
    """Rayleigh-quotient energy at explicit coefficients; (energy, ok)."""
    N = xis.shape[0]
    num = 0.0
    den = 0.0
    S = np.empty((N, N))
    finite = True
    for n in range(N):
        for m in range(N):
            xn = xis[n]
            xm = xis[m]
            zn = zetas[n]
            zm = zetas[m]
            P = xn + xm
            pref = math.sqrt(2.0) * (xn * xm / (P * P)) ** 0.25
            s = pref * math.exp(-((zn - zm) ** 2) * gp * gp * xn * xm / (2.0 * P))
            sbar = pref * math.exp(-((zn + zm) ** 2) * gp * gp * xn * xm / (2.0 * P))
            W = xn * zn + xm * zm
            x1 = s * (-W / P) * gp
            x2 = s * (1.0 / P + (W * gp / P) ** 2)
            D = -0.5 * xm
            E = -gp * xm * zm
            h = 0.5 * omega * (
                (1.0 - 4.0 * D * D) * x2 + (2.0 * gp - 4.0 * D * E) * x1 + (gp * gp - E * E - 2.0 * D) * s
            )
            val = h - 0.5 * Omega * sbar
            if not (math.isfinite(s) and math.isfinite(val)):
                finite = False
            S[n, m] = s
            num += c[n] * c[m] * val
            den += c[n] * c[m] * s
    if not finite:
        return math.inf, False
    w = np.linalg.eigvalsh(S)
    if w[0] <= 0.0 or w[N - 1] > COND_LIMIT * w[0]:
        return math.inf, False
    return num / den + eps0, True


def solve_linear_coeffs(polarons, model: ModelParams):
    """Exact coefficient minimization at fixed polarons.

    Returns (energy, coeffs) with coeffs normalized to c.S.c = 1 and the
    dominant component positive; raises IllConditionedError when the Gram
    matrix fails the positivity/condition bound.
    """
    polarons = list(polarons)
    xis = np.array([p.xi for p in polarons], dtype=float)
    zetas = np.array([p.zeta for p in polarons], dtype=float)
    scales = derive_scales(model)
    e, c, ok = _nested_core(xis, zetas, scales.g_prime, model.omega, model.Omega, scales.eps0)
    if not ok:
        raise IllConditionedError(
            f"Gram matrix of {len(polarons)} polarons is numerically singular (cond > {COND_LIMIT:g})"
        )
    if c[int(np.argmax(np.abs(c)))] < 0.0:
        c = -c
    return float(e), c


def _safe(objective, x) -> float:
    try:
        return float(objective(x))
    except FrmpeError:
        return math.inf


def anneal(objective, init, schedule: AnnealSchedule, seed, trace=None):
    """Metropolis annealing; returns the best-ever parameter vector.

    Proposals are uniform boxes of half-width proposal_scale * sqrt(t/t_init)
    per coordinate. Domain errors raised by the objective count as +inf
    (rejected move). Deterministic given (init, schedule, seed); `seed` may
    be an int or a numpy SeedSequence. Appends (stage, best_energy) pairs to
    `trace` when given.
    """
    x = np.asarray(init, dtype=float).copy()
    fx = _safe(objective, x)
    if not math.isfinite(fx):
        raise DomainError("annealing requires a finite objective at the initial point")
    rng = np.random.default_rng(seed)
    best = x.copy()
    fbest = fx
    t = schedule.t_init
    stage = 0
    while t > schedule.t_final:
        width = schedule.proposal_scale * math.sqrt(t / schedule.t_init)
        for _ in range(schedule.steps_per_stage):
            prop = x + rng.uniform(-width, width, x.size)
            u = rng.random()
            fp = _safe(objective, prop)
            if fp <= fx or u < math.exp(-(fp - fx) / t):
                x, fx = prop, fp
                if fx < fbest:
                    best = x.copy()
                    fbest = fx
        if trace is not None:
            trace.append((stage, fbest))
        t *= schedule.cooling
        stage += 1
    return best


def _explore(objective, center, fcenter, step):
    """Greedy coordinate probe around a point; never returns a worse point."""
    x = center.copy()
    fx = fcenter
    for i in range(x.size):
        for delta in (step, -step):
            cand = x.copy()
            cand[i] += delta
            fc = _safe(objective, cand)
            if fc < fx:
                x, fx = cand, fc
                break
    return x, fx


def pattern_search(objective, init, config: PatternConfig = PatternConfig(), trace=None):
    """Hooke-Jeeves refinement; returns a point no worse than init.

    Exploratory coordinate moves around the base point; on success, pattern
    (extrapolation) moves repeat while they keep improving; on failure the
    mesh contracts until it passes step_min. The accepted objective value is
    non-increasing throughout. Appends (mesh, best_energy) to `trace`.
    """
    x = np.asarray(init, dtype=float).copy()
    fx = _safe(objective, x)
    if not math.isfinite(fx):
        raise DomainError("pattern search requires a finite objective at the initial point")
    step = config.step_init
    while step >= config.step_min:
        trial, ftrial = _explore(objective, x, fx, step)
        if ftrial < fx:
            while True:
                direction = trial - x
                x, fx = trial, ftrial
                probe = x + direction
                t2, f2 = _explore(objective, probe, _safe(objective, probe), step)
                if f2 < fx:
                    trial, ftrial = t2, f2
                else:
                    break
        else:
            step *= config.shrink
        if trace is not None:
            trace.append((step, fx))
    return x


class _Counting:
    """Objective wrapper that counts evaluations."""

    __slots__ = ("fn", "count")

    def __init__(self, fn):
        self.fn = fn
        self.count = 0

    def __call__(self, x):
        self.count += 1
        return self.fn(x)


def _make_objective(model: ModelParams, spec: OptimizeSpec):
    scales = derive_scales(model)
    gp, om, Om, eps0 = scales.g_prime, model.omega, model.Omega, scales.eps0
    N = spec.n_polarons
    if spec.strategy is Strategy.NESTED:
        if spec.mode is AnsatzMode.FRMPE:
            def obj(p):
                e, _, ok = _nested_core(np.exp(p[:N]), p[N:].copy(), gp, om, Om, eps0)
                return e
        else:
            ones = np.ones(N)

            def obj(p):
                e, _, ok = _nested_core(ones, p.copy(), gp, om, Om, eps0)
                return e
    else:
        if spec.mode is AnsatzMode.FRMPE:
            def obj(p):
                c = np.empty(N)
                c[0] = 1.0
                c[1:] = p[: N - 1]
                e, ok = _full_core(c, np.exp(p[N - 1 : 2 * N - 1]), p[2 * N - 1 :].copy(), gp, om, Om, eps0)
                return e
        else:
            ones = np.ones(N)

            def obj(p):
                c = np.empty(N)
                c[0] = 1.0
                c[1:] = p[: N - 1]
                e, ok = _full_core(c, ones, p[N - 1 :].copy(), gp, om, Om, eps0)
                return e
    return obj


def _classical_zetas(N: int) -> np.ndarray:
    mags = 0.95 * 0.6 ** (np.arange(N) // 2)
    signs = np.where(np.arange(N) % 2 == 0, 1.0, -1.0)
    return mags * signs


def _initial_params(spec: OptimizeSpec, restart: int) -> np.ndarray:
    N = spec.n_polarons
    zetas = _classical_zetas(N)
    lnxi = np.zeros(N)
    c_rest = 0.6 ** np.arange(1, N)
    if restart > 0:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.seed, spawn_key=(restart, 0)))
        zetas = zetas * rng.uniform(0.4, 1.6, N) + rng.uniform(-0.3, 0.3, N)
        lnxi = rng.uniform(-0.7, 0.7, N)
        c_rest = c_rest + rng.uniform(-0.5, 0.5, max(N - 1, 0))
    return _pack(spec, c_rest, lnxi, zetas)


def _pack(spec: OptimizeSpec, c_rest, lnxi, zetas) -> np.ndarray:
    if spec.strategy is Strategy.NESTED:
        if spec.mode is AnsatzMode.FRMPE:
            return np.concatenate([lnxi, zetas])
        return np.asarray(zetas, dtype=float).copy()
    if spec.mode is AnsatzMode.FRMPE:
        return np.concatenate([c_rest, lnxi, zetas])
    return np.concatenate([c_rest, zetas])


def _params_from_state(state: AnsatzState, spec: OptimizeSpec) -> np.ndarray:
    """Warm-start parameter vector from an existing state."""
    if state.n_polarons != spec.n_polarons:
        raise DomainError(
            f"warm-start state has {state.n_polarons} polarons, spec wants {spec.n_polarons}"
        )
    if spec.mode is AnsatzMode.CSE and any(p.xi != 1.0 for p in state.polarons):
        raise DomainError("cannot warm-start CSE optimization from a state with xi != 1")
    coeffs = state.coeff_array()
    lnxi = np.log(state.xi_array())
    zetas = state.zeta_array()
    if spec.strategy is Strategy.FULL:
        # pin the dominant coefficient at 1 by reordering polarons
        order = np.argsort(-np.abs(coeffs), kind="stable")
        coeffs, lnxi, zetas = coeffs[order], lnxi[order], zetas[order]
        if coeffs[0] == 0.0:
            raise DomainError("warm-start state has all-zero coefficients")
        c_rest = coeffs[1:] / coeffs[0]
    else:
        c_rest = coeffs[1:]
    return _pack(spec, c_rest, lnxi, zetas)


def _state_from_params(p: np.ndarray, spec: OptimizeSpec, model: ModelParams) -> AnsatzState:
    N = spec.n_polarons
    if spec.strategy is Strategy.NESTED:
        if spec.mode is AnsatzMode.FRMPE:
            xis, zetas = np.exp(p[:N]), p[N:]
        else:
            xis, zetas = np.ones(N), p
        polarons = tuple(Polaron(xi=float(x), zeta=float(z)) for x, z in zip(xis, zetas))
        _, coeffs = solve_linear_coeffs(polarons, model)
    else:
        coeffs = np.concatenate([[1.0], p[: N - 1]])
        if spec.mode is AnsatzMode.FRMPE:
            xis, zetas = np.exp(p[N - 1 : 2 * N - 1]), p[2 * N - 1 :]
        else:
            xis, zetas = np.ones(N), p[N - 1 :]
        polarons = tuple(Polaron(xi=float(x), zeta=float(z)) for x, z in zip(xis, zetas))
    return AnsatzState(coeffs=tuple(float(c) for c in coeffs), polarons=polarons, mode=spec.mode)


def grow_state(state: AnsatzState, n_target: int) -> AnsatzState:
    """Extend a state with extra near-silent polarons, preserving its energy.

    New polarons carry tiny coefficients and sit at staggered fractions of
    the current maximum displacement, so the enlarged basis contains the
    original state and nested re-optimization can only improve on it.
    """
    if n_target < state.n_polarons:
        raise DomainError(f"cannot shrink a state from {state.n_polarons} to {n_target} polarons")
    if n_target == state.n_polarons:
        return state
    coeffs = list(state.coeffs)
    polarons = list(state.polarons)
    zmax = max(abs(p.zeta) for p in polarons) or 0.5
    xi_new = 1.0 if state.mode is AnsatzMode.CSE else float(np.mean([p.xi for p in polarons]))
    c_tiny = 1e-3 * max(abs(c) for c in coeffs)
    taken = [(p.xi, p.zeta) for p in polarons]
    for j in range(n_target - state.n_polarons):
        z = (0.5 * zmax * 0.8 ** (j // 2)) * (1.0 if j % 2 == 0 else -1.0)
        while any(abs(z - zt) < 1e-3 * max(1.0, zmax) and abs(xi_new - xt) < 1e-3 for xt, zt in taken):
            z *= 0.77
        taken.append((xi_new, z))
        polarons.append(Polaron(xi=xi_new, zeta=z))
        coeffs.append(c_tiny)
    return AnsatzState(coeffs=tuple(coeffs), polarons=tuple(polarons), mode=state.mode)


def optimize(
    model: ModelParams,
    spec: OptimizeSpec,
    schedule: AnnealSchedule = None,
    pconfig: PatternConfig = None,
    init_state: AnsatzState = None,
    trace=None,
) -> VariationalResult:
    """Run seeded anneal+refine pipelines and return the best result.

    `restarts` independent pipelines run from seeded initial points; when
    `init_state` is given, one extra warm-started pipeline runs from it (its
    index is spec.restarts). Pipelines whose objective is singular at the
    initial point are skipped; AllRestartsFailedError is raised only if no
    pipeline survives. Trace entries, when requested, are
    (restart, phase, stage_or_mesh, best_energy) tuples.
    """
    if schedule is None:
        schedule = default_schedule(model)
    if pconfig is None:
        pconfig = PatternConfig()
    objective = _Counting(_make_objective(model, spec))

    pipelines = [(r, _initial_params(spec, r)) for r in range(spec.restarts)]
    if init_state is not None:
        pipelines.append((spec.restarts, _params_from_state(init_state, spec)))

    best_e = math.inf
    best_x = None
    best_idx = -1
    for idx, p0 in pipelines:
        sub_trace = [] if trace is not None else None
        try:
            x1 = anneal(
                objective,
                p0,
                schedule,
                seed=np.random.SeedSequence(entropy=spec.seed, spawn_key=(idx, 1)),
                trace=sub_trace,
            )
            if sub_trace is not None:
                trace.extend((idx, "anneal", s, e) for s, e in sub_trace)
                sub_trace = []
            x2 = pattern_search(objective, x1, pconfig, trace=sub_trace)
            if sub_trace is not None:
                trace.extend((idx, "pattern", s, e) for s, e in sub_trace)
        except FrmpeError:
            continue
        e = _safe(objective, x2)
        if math.isfinite(e) and e < best_e - TIE_BREAK:
            best_e, best_x, best_idx = e, x2, idx
    if best_x is None:
        raise AllRestartsFailedError(
            f"all {len(pipelines)} optimization pipelines ended ill-conditioned"
        )

    state = normalize(_state_from_params(best_x, spec, model), model)
    if plus_branch_weight(state, model) < 0.0:
        # sign convention shared with the ED branch: integral of Psi+ over x>0 positive
        state = AnsatzState(
            coeffs=tuple(-c for c in state.coeffs), polarons=state.polarons, mode=state.mode
        )
    return VariationalResult(
        energy=state_energy(state, model),
        state=state,
        observables=observables(state, model),
        evaluations=objective.count,
        restarts_used=len(pipelines),
        best_restart=best_idx,
        seed=spec.seed,
    )
