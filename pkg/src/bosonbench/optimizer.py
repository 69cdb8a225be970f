"""Covariance-matrix-adaptation search over code parameters.

A small self-contained CMA-ES works in normalized [0, 1] coordinates:
candidates are sampled from an adapted Gaussian, clipped into the box
for evaluation and for the mean update, while the unclipped deviations
feed the covariance update.  Discrete parameters (the number-phase
rotation order s) are handled by exhaustive restarts rather than by
rounding inside the sampler.

Candidate fitness is the near-optimal fidelity of the built code under
the requested noise point; construction failures and flagged
evaluations score zero so the population update stays total.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channel import NoisePoint
from .codes import (
    FAMILY_GKP,
    FAMILY_NP,
    CodePair,
    GkpParams,
    NpParams,
    build_gkp,
    build_np,
)
from .errors import (
    ConstructionError,
    IncompleteChannelError,
    InvalidArgumentError,
    OptimizationFailureError,
)
from .qec import EvalOptions, FidelityResult, evaluate_pair, resolve_tolerances

CONDITION_CAP = 1e14
DEFAULT_POPSIZE = 50
DEFAULT_SIGMA0 = 0.3
DEFAULT_GENERATIONS = 60
PILOT_EPS = 1e-4
PILOT_HEADROOM = 100.0
DESK_DIM_CAP = 220
PAPER_DIM_CAP = 2048
NP_S_VALUES = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class SearchSpace:
    """Box-bounded continuous parameters plus enumerated discrete ones."""

    names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray
    discrete: tuple[tuple[str, tuple[int, ...]], ...] = ()

    def __post_init__(self) -> None:
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if len(self.names) != lower.size or lower.size != upper.size:
            raise InvalidArgumentError("names, lower and upper must have equal length")
        if lower.size == 0:
            raise InvalidArgumentError("search space needs at least one continuous parameter")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise InvalidArgumentError("box bounds must be finite")
        if not np.all(lower < upper):
            raise InvalidArgumentError(
                f"degenerate box: need lower < upper componentwise, got {lower} vs {upper}"
            )
        for name, values in self.discrete:
            if len(values) == 0:
                raise InvalidArgumentError(f"discrete parameter {name} has no values")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        return self.lower + np.asarray(z, dtype=float) * (self.upper - self.lower)

    def assignments(self) -> list[dict[str, int]]:
        if not self.discrete:
            return [{}]
        names = [name for name, _ in self.discrete]
        grids = [values for _, values in self.discrete]
        return [dict(zip(names, combo)) for combo in itertools.product(*grids)]


def default_space(family: str, paper_scale: bool = False) -> SearchSpace:
    """Family search boxes: desk-scale caps keep truncation dimensions
    laptop-sized; paper scale widens the energy-related bounds."""
    if family == FAMILY_GKP:
        delta_low = 0.18 if paper_scale else 0.3
        root_pi = math.sqrt(math.pi)
        return SearchSpace(
            names=("alpha", "beta_real", "delta"),
            lower=np.array([0.1, -root_pi, delta_low]),
            upper=np.array([root_pi, root_pi, 0.6]),
        )
    if family == FAMILY_NP:
        n_high = 4.0 if paper_scale else 3.0
        return SearchSpace(
            names=("f", "r", "n"),
            lower=np.array([0.0, -0.4, 1.0]),
            upper=np.array([1.0, 0.4, n_high]),
            discrete=(("s", NP_S_VALUES),),
        )
    raise InvalidArgumentError(f"no default search space for family {family!r}")


@dataclass
class CmaState:
    """Full strategy state; ask stashes its samples so tell can finish
    the generation."""

    mean: np.ndarray
    step_size: float
    covariance: np.ndarray
    path_sigma: np.ndarray
    path_cov: np.ndarray
    generation: int
    weights: np.ndarray
    population_size: int
    rng_seed: int
    rng: np.random.Generator = field(repr=False)
    mu_eff: float = 0.0
    c_sigma: float = 0.0
    d_sigma: float = 0.0
    c_cov: float = 0.0
    c_one: float = 0.0
    c_mu: float = 0.0
    chi_n: float = 0.0
    recondition_count: int = 0
    _pending_raw: np.ndarray | None = field(default=None, repr=False)
    _pending_repaired: np.ndarray | None = field(default=None, repr=False)
    _basis: np.ndarray | None = field(default=None, repr=False)
    _scales: np.ndarray | None = field(default=None, repr=False)

    @property
    def condition_number(self) -> float:
        vals = np.linalg.eigvalsh(0.5 * (self.covariance + self.covariance.T))
        low = float(vals[0])
        high = float(vals[-1])
        if low <= 0.0:
            return math.inf
        return high / low


def cma_init(
    space: SearchSpace,
    sigma0: float = DEFAULT_SIGMA0,
    popsize: int = DEFAULT_POPSIZE,
    seed: int = 0,
) -> CmaState:
    """Fresh strategy state at the box center in normalized coordinates,
    with log-rank recombination weights over the best half."""
    if popsize < 4:
        raise InvalidArgumentError(f"popsize must be at least 4, got {popsize}")
    if not 0.0 < sigma0 < 10.0:
        raise InvalidArgumentError(f"sigma0 must lie in (0, 10), got {sigma0!r}")
    n = space.dim
    mu = popsize // 2
    raw = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / np.sum(raw)
    mu_eff = 1.0 / float(np.sum(weights**2))
    c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma
    c_cov = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n)
    c_one = 2.0 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c_one, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) ** 2 + mu_eff))
    chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))
    return CmaState(
        mean=np.full(n, 0.5),
        step_size=float(sigma0),
        covariance=np.eye(n),
        path_sigma=np.zeros(n),
        path_cov=np.zeros(n),
        generation=0,
        weights=weights,
        population_size=int(popsize),
        rng_seed=int(seed),
        rng=np.random.default_rng(np.random.SeedSequence(entropy=int(seed))),
        mu_eff=mu_eff,
        c_sigma=c_sigma,
        d_sigma=d_sigma,
        c_cov=c_cov,
        c_one=c_one,
        c_mu=c_mu,
        chi_n=chi_n,
    )


def _factorize(state: CmaState) -> tuple[np.ndarray, np.ndarray]:
    cov = 0.5 * (state.covariance + state.covariance.T)
    vals, basis = np.linalg.eigh(cov)
    vals = np.maximum(vals, 0.0)
    return basis, np.sqrt(vals)


def cma_ask(state: CmaState) -> list[np.ndarray]:
    """Sample one population; returns box-clipped candidates while the
    unclipped draws stay stashed for the covariance update."""
    basis, scales = _factorize(state)
    z = state.rng.standard_normal((state.population_size, state.mean.size))
    raw = state.mean + state.step_size * (z * scales) @ basis.T
    repaired = np.clip(raw, 0.0, 1.0)
    state._pending_raw = raw
    state._pending_repaired = repaired
    state._basis = basis
    state._scales = scales
    return [repaired[i].copy() for i in range(state.population_size)]


def cma_tell(state: CmaState, fitnesses: list[float]) -> CmaState:
    """Standard rank-based CMA-ES update; larger fitness is better.

    Non-finite fitness entries are ranked worst.  The mean moves to the
    weighted average of the clipped candidates; covariance and step-size
    paths use the unclipped deviations.
    """
    if state._pending_raw is None or state._basis is None:
        raise InvalidArgumentError("cma_tell called without a pending cma_ask population")
    lam = state.population_size
    fit = np.asarray(fitnesses, dtype=float)
    if fit.shape != (lam,):
        raise InvalidArgumentError(f"expected {lam} fitness values, got shape {fit.shape}")
    fit = np.where(np.isfinite(fit), fit, -np.inf)
    order = np.argsort(-fit, kind="stable")
    mu = state.weights.size
    chosen = order[:mu]

    old_mean = state.mean
    sigma = state.step_size
    repaired = state._pending_repaired
    rawpop = state._pending_raw
    new_mean = state.weights @ repaired[chosen]
    shift = (new_mean - old_mean) / sigma

    inv_scales = np.where(state._scales > 1e-150, 1.0 / np.maximum(state._scales, 1e-150), 0.0)
    c_inv_sqrt_shift = (state._basis * inv_scales) @ (state._basis.T @ shift)
    cs, ds = state.c_sigma, state.d_sigma
    state.path_sigma = (1.0 - cs) * state.path_sigma + math.sqrt(
        cs * (2.0 - cs) * state.mu_eff
    ) * c_inv_sqrt_shift

    gen1 = state.generation + 1
    norm_ps = float(np.linalg.norm(state.path_sigma))
    denom = math.sqrt(1.0 - (1.0 - cs) ** (2 * gen1))
    h_sigma = 1.0 if norm_ps / denom < (1.4 + 2.0 / (state.mean.size + 1.0)) * state.chi_n else 0.0

    cc = state.c_cov
    state.path_cov = (1.0 - cc) * state.path_cov + h_sigma * math.sqrt(
        cc * (2.0 - cc) * state.mu_eff
    ) * shift

    deviations = (rawpop[chosen] - old_mean) / sigma
    rank_mu = (deviations.T * state.weights) @ deviations
    rank_one = np.outer(state.path_cov, state.path_cov)
    c1, cmu = state.c_one, state.c_mu
    cov = (
        (1.0 - c1 - cmu) * state.covariance
        + c1 * (rank_one + (1.0 - h_sigma) * cc * (2.0 - cc) * state.covariance)
        + cmu * rank_mu
    )
    cov = 0.5 * (cov + cov.T)
    vals = np.linalg.eigvalsh(cov)
    top = float(vals[-1])
    if top <= 0.0:
        cov = np.eye(state.mean.size)
        state.recondition_count += 1
    elif float(vals[0]) < top / CONDITION_CAP:
        cov = cov + (top / CONDITION_CAP - float(vals[0])) * np.eye(state.mean.size)
        state.recondition_count += 1
    state.covariance = cov

    state.step_size = sigma * math.exp((cs / ds) * (norm_ps / state.chi_n - 1.0))
    state.mean = new_mean
    state.generation = gen1
    state._pending_raw = None
    state._pending_repaired = None
    state._basis = None
    state._scales = None
    return state


@dataclass(frozen=True)
class OptimizationRecord:
    noise: NoisePoint
    family: str
    best_params: dict[str, float]
    best_fidelity: FidelityResult
    evaluations: int
    per_restart: tuple[tuple[tuple[tuple[str, int], ...], int, float], ...]
    trace: tuple[tuple[int, float, float, float, float], ...]
    seed: int
    eps_tol: float
    eps_kraus: float


def _build_candidate(
    family: str,
    names: tuple[str, ...],
    values: np.ndarray,
    assignment: dict[str, int],
    eps_tol: float,
    max_dim: int | None,
) -> CodePair:
    params = dict(zip(names, (float(v) for v in values)))
    params.update(assignment)
    if family == FAMILY_GKP:
        spec = GkpParams(alpha=params["alpha"], beta_real=params["beta_real"], delta=params["delta"])
        return build_gkp(spec, eps_tol=eps_tol, max_dim=max_dim)
    if family == FAMILY_NP:
        spec = NpParams(f=params["f"], s=int(params["s"]), r=params["r"], n=params["n"])
        return build_np(spec, eps_tol=eps_tol, max_dim=max_dim)
    raise InvalidArgumentError(f"cannot build candidates for family {family!r}")


def _fitness_function(
    family: str,
    space: SearchSpace,
    assignment: dict[str, int],
    noise: NoisePoint,
    options: EvalOptions,
    max_dim: int | None,
) -> Callable[[np.ndarray], tuple[float, FidelityResult | None]]:
    def run(point: np.ndarray) -> tuple[float, FidelityResult | None]:
        values = space.denormalize(point)
        try:
            code = _build_candidate(family, space.names, values, assignment, options.eps_tol, max_dim)
            result = evaluate_pair(code, noise, options)
        except (ConstructionError, IncompleteChannelError):
            return 0.0, None
        if result.flagged:
            return 0.0, result
        return result.f_tilde, result

    return run


def _pilot_tolerances(
    family: str,
    space: SearchSpace,
    assignment: dict[str, int],
    noise: NoisePoint,
    max_dim: int | None,
) -> tuple[float, float]:
    """Evaluate the box-center candidate coarsely and set search
    tolerances a couple of orders below its infidelity, with headroom
    for candidates that improve on it."""
    coarse = EvalOptions(eps_tol=PILOT_EPS, eps_kraus=PILOT_EPS)
    center = np.full(space.dim, 0.5)
    try:
        code = _build_candidate(family, space.names, space.denormalize(center), assignment, PILOT_EPS, max_dim)
        pilot = evaluate_pair(code, noise, coarse)
        scale = (1.0 - pilot.f_tilde) / PILOT_HEADROOM
    except (ConstructionError, IncompleteChannelError):
        scale = 1.0  # clips to the ceiling: coarse but always affordable
    return resolve_tolerances(scale)


def optimize_code(
    family: str,
    noise: NoisePoint,
    space: SearchSpace | None = None,
    budget: int = DEFAULT_GENERATIONS * DEFAULT_POPSIZE,
    seed: int = 0,
    restarts: int = 1,
    *,
    popsize: int = DEFAULT_POPSIZE,
    sigma0: float = DEFAULT_SIGMA0,
    options: EvalOptions | None = None,
    max_dim: int | None = DESK_DIM_CAP,
    workers: int = 1,
    paper_scale: bool = False,
) -> OptimizationRecord:
    """Maximize near-optimal fidelity over a family's parameter box.

    Each discrete assignment (the NP rotation order) is optimized by
    `restarts` independent CMA-ES runs of budget // popsize generations.
    When no explicit EvalOptions are given, tolerances are set per
    assignment from a coarse pilot evaluation at the box center.
    """
    if space is None:
        space = default_space(family, paper_scale=paper_scale)
    if budget < popsize:
        raise InvalidArgumentError(f"budget {budget} is below one population of {popsize}")
    if restarts < 1:
        raise InvalidArgumentError(f"restarts must be at least 1, got {restarts}")
    generations = budget // popsize
    assignments = space.assignments()

    runs = []
    evaluations = 0
    root = np.random.SeedSequence(entropy=int(seed))
    for a_idx, assignment in enumerate(assignments):
        if options is None:
            eps_tol, eps_kraus = _pilot_tolerances(family, space, assignment, noise, max_dim)
            run_options = EvalOptions(eps_tol=eps_tol, eps_kraus=eps_kraus)
            evaluations += 1
        else:
            run_options = options
        fitness = _fitness_function(family, space, assignment, noise, run_options, max_dim)
        for r_idx in range(restarts):
            run_seed = int(
                np.random.SeedSequence(entropy=int(seed), spawn_key=(a_idx, r_idx)).generate_state(1)[0]
            )
            state = cma_init(space, sigma0=sigma0, popsize=popsize, seed=run_seed)
            best_fit = -math.inf
            best_point: np.ndarray | None = None
            trace: list[tuple[int, float, float, float, float]] = []
            for _ in range(generations):
                points = cma_ask(state)
                if workers > 1:
                    with ThreadPoolExecutor(max_workers=workers) as pool:
                        outcomes = list(pool.map(fitness, points))
                else:
                    outcomes = [fitness(p) for p in points]
                evaluations += len(points)
                fits = [o[0] for o in outcomes]
                for point, (fit, _res) in zip(points, outcomes):
                    if fit > best_fit:
                        best_fit = fit
                        best_point = point
                cma_tell(state, fits)
                trace.append(
                    (
                        state.generation,
                        best_fit,
                        float(np.mean(fits)),
                        state.step_size,
                        state.condition_number,
                    )
                )
            if best_point is not None and best_fit > 0.0:
                runs.append(
                    {
                        "assignment": assignment,
                        "restart": r_idx,
                        "point": best_point,
                        "search_f": best_fit,
                        "options": run_options,
                        "trace": tuple(trace),
                    }
                )

    if not runs:
        raise OptimizationFailureError(
            f"no successful evaluations for family {family!r} at {noise} within budget {budget}"
        )

    # Re-evaluate each run's incumbent at a tolerance tied to its own
    # infidelity, so reported values share a certified accuracy level.
    finals = []
    for run in runs:
        eps_tol, eps_kraus = resolve_tolerances(1.0 - run["search_f"])
        tight = EvalOptions(eps_tol=eps_tol, eps_kraus=eps_kraus)
        fitness = _fitness_function(
            family, space, run["assignment"], noise, tight, max_dim
        )
        fit, result = fitness(run["point"])
        evaluations += 1
        if result is None or fit <= 0.0:
            tight = run["options"]
            fit, result = _fitness_function(
                family, space, run["assignment"], noise, tight, max_dim
            )(run["point"])
            evaluations += 1
        finals.append((fit, result, tight, run))

    finals_ok = [f for f in finals if f[1] is not None and f[0] > 0.0]
    if not finals_ok:
        raise OptimizationFailureError(
            f"incumbent re-evaluation failed for every restart of family {family!r} at {noise}"
        )
    best_fit, best_result, best_options, best_run = max(finals_ok, key=lambda item: item[0])

    per_restart = tuple(
        (tuple(sorted(run["assignment"].items())), run["restart"], fit)
        for fit, result, _opts, run in finals
    )
    values = space.denormalize(best_run["point"])
    best_params = {name: float(v) for name, v in zip(space.names, values)}
    best_params.update({k: float(v) for k, v in best_run["assignment"].items()})
    return OptimizationRecord(
        noise=noise,
        family=family,
        best_params=best_params,
        best_fidelity=best_result,
        evaluations=evaluations,
        per_restart=per_restart,
        trace=best_run["trace"],
        seed=int(seed),
        eps_tol=best_options.eps_tol,
        eps_kraus=best_options.eps_kraus,
    )


def repeatability_report(records: list[OptimizationRecord]) -> float:
    """Max pairwise fidelity spread across repeated runs, relative to the
    smallest infidelity among them."""
    if len(records) < 2:
        raise InvalidArgumentError("repeatability needs at least two records")
    noise = records[0].noise
    family = records[0].family
    for rec in records[1:]:
        if rec.noise != noise or rec.family != family:
            raise InvalidArgumentError("records must share one noise point and family")
    values = [rec.best_fidelity.f_tilde for rec in records]
    spread = max(values) - min(values)
    if spread == 0.0:
        return 0.0
    floor = min(1.0 - v for v in values)
    return spread / max(floor, 1e-300)
