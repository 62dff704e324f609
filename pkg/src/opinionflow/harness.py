"""Monte Carlo drivers that check the model's probabilistic claims at desk scale.

Each verifier instantiates one theorem: it validates the theorem's
hypothesis against the config (rejecting with the failed inequality named),
runs seeded trials, and compares the empirical success frequency against
the theorem's probability bound minus a 3-sigma statistical slack, with a
Wilson 95% interval reported alongside. Probability-one claims are checked
as ">= 99.5% of trials" by convention: finite precision and iteration caps
make the literal claim untestable.

Trials are embarrassingly parallel; per-trial seeds come from the root seed
by spawn index, so results never depend on worker count.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (MAX_ITERS, THETA_ACTIVE, TOL_STEP, PopulationState,
                       classify_fixed_point, run_to_convergence)
from .errors import HypothesisError, NotAFixedPointError
from .evolution import EvolutionConfig, Timeline, run_evolution
from .graph import InfluenceGraph
from .influence import InfluenceAssignment
from .seeding import generator, trial_seed

CONVERGENCE_SUCCESS_BAR = 0.995   # empirical stand-in for "probability one"


# -- sampling -----------------------------------------------------------------

def sample_simplex(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform point on the n-simplex: n standard exponentials, normalized."""
    if n < 1:
        raise ValueError("n must be at least 1")
    draws = rng.exponential(scale=1.0, size=n)
    return draws / draws.sum()


def sample_state(graph: InfluenceGraph, rng: np.random.Generator) -> PopulationState:
    ids = tuple(graph.vertex_list())
    return PopulationState(graph, ids, sample_simplex(rng, len(ids)))


# -- statistics ---------------------------------------------------------------

def wilson95(successes: int, trials: int) -> tuple[float, float]:
    """Wilson score 95% interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    z = 1.959963984540054
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def three_sigma_slack(bound: float, trials: int) -> float:
    """3 standard errors of a proportion estimated at the paper's bound."""
    return 3.0 * math.sqrt(max(bound * (1.0 - bound), 0.0) / trials)


@dataclass
class TrialStats:
    """Aggregated outcome of a seeded trial sweep."""

    trials: int
    successes: int
    estimate: float
    wilson: tuple[float, float]
    paper_bound: float | None = None
    slack: float = 0.0
    verdict: str | None = None           # "pass" | "fail" | "vacuous"
    artifacts: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "trials": self.trials,
            "successes": self.successes,
            "estimate": self.estimate,
            "wilson95": list(self.wilson),
            "paper_bound": self.paper_bound,
            "slack": self.slack,
            "verdict": self.verdict,
            **self.extras,
        }


def _finish(successes: int, trials: int, bound: float | None,
            artifacts: list, extras: dict, vacuous: bool = False) -> TrialStats:
    estimate = successes / trials if trials else 0.0
    slack = three_sigma_slack(bound, trials) if bound is not None else 0.0
    if vacuous:
        verdict = "vacuous"
    elif bound is None:
        verdict = None
    else:
        verdict = "pass" if estimate >= bound - slack else "fail"
    return TrialStats(trials, successes, estimate, wilson95(successes, trials),
                      bound, slack, verdict, artifacts, extras)


def _pmap(fn, items, jobs: int) -> list:
    if jobs <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        chunk = max(1, len(items) // (4 * jobs))
        return list(pool.map(fn, items, chunksize=chunk))


# -- convergence to independent sets -------------------------------------------

def _settled_limit(res, assignment, theta: float, tol: float, max_iters: int):
    """Iterate past the step-size stop until the limit classifies structurally.

    The L1-step criterion can fire while a vanishing type still sits above
    the activity threshold (its decay is slow when its absorbing neighbor
    is small), which would misread the limit's support. Such states fail
    the equal-mass component test, so we keep iterating, within the same
    total budget, until the state classifies as a fixed point. The
    fixed-point flow gate uses tol: a limit accepted at L1 step < tol
    carries residual flows of that scale.
    """
    state, used = res.limit, res.iterations
    if not res.converged:
        return state, used, False
    from .dynamics import PopulationState as _State
    from .dynamics import kernel_for
    kernel = kernel_for(state, assignment)
    x = state.x
    while True:
        state = _State(state.graph, state.ids, x, state.t)
        try:
            classify_fixed_point(state, assignment, theta, tol_mass=1e-6, tol_flow=tol)
            return state, used, True
        except NotAFixedPointError:
            if used >= max_iters:
                return state, used, False
            for _ in range(min(1024, max_iters - used)):
                x = x + kernel.net(kernel.flows(x, 0.0))
                x /= x.sum()
                used += 1


def _convergence_trial(args) -> dict:
    graph, assignment, seed, tol, max_iters, theta = args
    x0 = sample_state(graph, generator(seed))
    res = run_to_convergence(x0, assignment, tol, max_iters, record_phi=False)
    limit, iterations, settled = _settled_limit(res, assignment, theta, tol, max_iters)
    active = sorted(limit.active_set(theta))
    independent = limit.graph.is_independent_set(active)
    label = "+".join(map(str, active)) if active else "none"
    return {"converged": res.converged and settled, "iterations": iterations,
            "active": active, "independent": independent, "label": label,
            "equal_mass_components": settled}


def monte_carlo_convergence(graph: InfluenceGraph, assignment: InfluenceAssignment,
                            trials: int, root_seed: int = 0,
                            tol: float = TOL_STEP, max_iters: int = MAX_ITERS,
                            theta_active: float = THETA_ACTIVE,
                            jobs: int = 1) -> TrialStats:
    """Estimate how often uniform starts reach an independent active set.

    Requires sup|F| < 1/2 on the graph's edges (the regime in which the
    almost-sure claim holds). Unconverged trials count as failures. The
    extras carry a basin census: limit label -> trial count.
    """
    sup = assignment.sup_abs(graph)
    if sup >= 0.5:
        raise HypothesisError("sup|F| < 1/2", f"sup|F| = {sup:g} >= 1/2")
    items = [(graph, assignment, trial_seed(root_seed, i), tol, max_iters, theta_active)
             for i in range(trials)]
    artifacts = _pmap(_convergence_trial, items, jobs)
    successes = sum(1 for a in artifacts if a["converged"] and a["independent"])
    census = Counter(a["label"] for a in artifacts if a["converged"])
    extras = {"census": dict(sorted(census.items())),
              "unconverged": sum(1 for a in artifacts if not a["converged"])}
    return _finish(successes, trials, CONVERGENCE_SUCCESS_BAR, artifacts, extras)


# -- basin map ------------------------------------------------------------------

@dataclass
class BasinMap:
    """Raster of limit labels over the 2-simplex of a 3-type graph.

    Row i fixes the first coordinate at i/resolution; cell j within the row
    sets the second to j/resolution and the third to the remainder. Labels
    are "+"-joined active ids of the limit, or "unresolved".
    """

    ids: tuple[int, int, int]
    resolution: int
    rows: list[list[str]]
    legend: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.legend:
            labels = sorted({lab for row in self.rows for lab in row})
            self.legend = {lab: k for k, lab in enumerate(labels)}

    def cell_count(self) -> int:
        return sum(len(row) for row in self.rows)

    def label_fractions(self) -> dict[str, float]:
        counts = Counter(lab for row in self.rows for lab in row)
        total = self.cell_count()
        return {lab: counts[lab] / total for lab in sorted(counts)}

    def label_at(self, weights) -> str:
        """Label of the cell nearest to barycentric ``weights`` over ``ids``."""
        w = np.asarray(weights, dtype=float)
        i = int(round(w[0] * self.resolution))
        j = int(round(w[1] * self.resolution))
        i = min(max(i, 0), self.resolution)
        j = min(max(j, 0), self.resolution - i)
        return self.rows[i][j]

    def to_csv(self) -> str:
        return "\n".join(",".join(row) for row in self.rows) + "\n"

    def to_pgm(self) -> str:
        """Plain portable graymap; cells outside the simplex are 0."""
        n_labels = max(len(self.legend), 1)
        grays = {lab: int(round(40 + (255 - 40) * k / max(n_labels - 1, 1)))
                 for lab, k in self.legend.items()}
        side = self.resolution + 1
        lines = ["P2", f"{side} {side}", "255"]
        for i in range(side):
            row = self.rows[i] if i < len(self.rows) else []
            vals = [grays[lab] for lab in row] + [0] * (side - len(row))
            lines.append(" ".join(map(str, vals)))
        return "\n".join(lines) + "\n"


def _basin_row(args) -> list[str]:
    graph, assignment, resolution, i, tol, max_iters, theta = args
    ids = tuple(graph.vertex_list())
    labels = []
    for j in range(resolution - i + 1):
        # integer numerators over one denominator keep diagonal ties exact,
        # so tie cells legitimately converge to split limits
        x = np.array([i, j, resolution - i - j], dtype=float) / resolution
        state = PopulationState(graph, ids, x)
        res = run_to_convergence(state, assignment, tol, max_iters, record_phi=False)
        if not res.converged:
            labels.append("unresolved")
            continue
        active = sorted(res.limit.active_set(theta))
        labels.append("+".join(map(str, active)) if active else "none")
    return labels


def basin_map(graph: InfluenceGraph, assignment: InfluenceAssignment,
              resolution: int = 400, tol: float = TOL_STEP,
              max_iters: int = MAX_ITERS, theta_active: float = THETA_ACTIVE,
              jobs: int = 1) -> BasinMap:
    """Run every barycentric grid cell to convergence and label its basin.

    Boundary cells are included: the simplex boundary is invariant under
    the dynamics, so they are legitimate starts.
    """
    if len(graph) != 3:
        raise ValueError("basin_map needs a graph of exactly 3 types")
    if resolution < 1:
        raise ValueError("resolution must be at least 1")
    items = [(graph, assignment, resolution, i, tol, max_iters, theta_active)
             for i in range(resolution + 1)]
    rows = _pmap(_basin_row, items, jobs)
    ids = tuple(graph.vertex_list())
    return BasinMap(ids, resolution, rows)


# -- stability windows -----------------------------------------------------------

@dataclass(frozen=True)
class StableWindow:
    """Maximal run of steps whose migration phase moved no mass.

    Covers steps start .. start+duration inclusive (duration = length-1,
    matching the inclusive-range definition of stability windows).
    """

    start: int
    duration: int

    @property
    def length(self) -> int:
        return self.duration + 1


def detect_stable_windows(timeline: Timeline) -> list[StableWindow]:
    """All maximal windows of migration-inactive steps, in order."""
    windows = []
    run_start = None
    last = None
    for record in timeline:
        if not record.migration_active:
            if run_start is None:
                run_start = record.step
            last = record.step
        elif run_start is not None:
            windows.append(StableWindow(run_start, last - run_start))
            run_start = None
    if run_start is not None:
        windows.append(StableWindow(run_start, last - run_start))
    return windows


def required_window_length(p: float) -> int:
    """Steps covered by a window of extent 1/(3p): floor(1/(3p)) + 1."""
    if p <= 0:
        raise ValueError("p must be positive")
    return int(math.floor(1.0 / (3.0 * p))) + 1


# -- theorem: long quiet periods under infrequent births --------------------------

def _evolution_trial(args) -> dict:
    config, initial_graph, seed_run, seed_x0, needed = args
    x0 = sample_state(initial_graph, generator(seed_x0))
    timeline = run_evolution(x0, replace(config, seed=seed_run))
    windows = detect_stable_windows(timeline)
    best = max((w.length for w in windows), default=0)
    return {"best_window": best, "windows": len(windows),
            "births": timeline.birth_count(), "success": best >= needed}


def verify_stability_theorem(config: EvolutionConfig, trials: int,
                             initial_graph: InfluenceGraph | None = None,
                             root_seed: int = 0, jobs: int = 1) -> TrialStats:
    """Check: with prob >= 1-e^(-tp/6) a quiet window of extent 1/(3p) starts by t.

    Hypothesis (rejected with the failed inequality named):
      p < min(eps*delta^3*alpha_min / (3*beta_max), 2/3)  and  p > 0
      horizon > 1 / (eps*delta^3*alpha_min - 3*p*beta_max)
    """
    alpha_min, _ = config.assignment.alpha_bounds()
    gain = config.epsilon * config.delta**3 * alpha_min
    if config.p <= 0:
        raise HypothesisError("p > 0", "the 1/(3p) window needs a positive birth rate")
    p_cap = min(gain / (3.0 * config.beta_max), 2.0 / 3.0)
    if not config.p < p_cap:
        raise HypothesisError(
            "p < min(eps*delta^3*alpha_min/(3*beta_max), 2/3)",
            f"p = {config.p:g} >= {p_cap:g}")
    drift = gain - 3.0 * config.p * config.beta_max
    if not config.horizon > 1.0 / drift:
        raise HypothesisError(
            "t > 1/(eps*delta^3*alpha_min - 3*p*beta_max)",
            f"horizon = {config.horizon} <= {1.0 / drift:g}")

    graph = initial_graph or InfluenceGraph.path(4)
    needed = required_window_length(config.p)
    items = [(config, graph, trial_seed(root_seed, 2 * i), trial_seed(root_seed, 2 * i + 1),
              needed) for i in range(trials)]
    artifacts = _pmap(_evolution_trial, items, jobs)
    successes = sum(1 for a in artifacts if a["success"])
    bound = 1.0 - math.exp(-config.horizon * config.p / 6.0)
    extras = {"required_window": needed,
              "mean_best_window": float(np.mean([a["best_window"] for a in artifacts]))}
    return _finish(successes, trials, bound, artifacts, extras)


# -- theorem: the number of types stays logarithmic --------------------------------

def _type_bound_trial(args) -> dict:
    config, initial_graph, start, seed_run, seed_x0, bound_types, cap = args
    if start == "adversarial":
        x0 = PopulationState.uniform(initial_graph)
    else:
        x0 = sample_state(initial_graph, generator(seed_x0))
    timeline = run_evolution(x0, replace(config, seed=seed_run))
    final = timeline.records[-1].type_count
    peak = timeline.max_type_count()
    return {"final_types": final, "peak_types": peak,
            "cap_ok": peak <= cap, "success": final <= bound_types}


def verify_type_bound(config: EvolutionConfig, trials: int,
                      start: str = "random", initial_types: int = 8,
                      initial_graph: InfluenceGraph | None = None,
                      root_seed: int = 0, jobs: int = 1) -> TrialStats:
    """Check: at the horizon, the type count is <= 72*ln(1/eps) w.p. >= 1-3*eps.

    Hypothesis: alpha_max <= p/512 and horizon >= (16/p)*ln(1/eps)^2.
    When 72*ln(1/eps) already exceeds the hard floor(1/eps) cap the bound
    says nothing; the sweep still runs but the verdict is "vacuous".
    ``start`` is "random" (uniform simplex point) or "adversarial"
    (``initial_types`` types at equal mass).
    """
    _, alpha_max = config.assignment.alpha_bounds()
    if not alpha_max <= config.p / 512.0:
        raise HypothesisError("alpha_max <= p/512",
                              f"alpha_max = {alpha_max:g} > {config.p / 512.0:g}")
    log_inv_eps = math.log(1.0 / config.epsilon)
    t_min = (16.0 / config.p) * log_inv_eps**2
    if not config.horizon >= t_min:
        raise HypothesisError("t >= (16/p)*log^2(1/eps)",
                              f"horizon = {config.horizon} < {t_min:g}")
    if start not in ("random", "adversarial"):
        raise ValueError("start must be 'random' or 'adversarial'")

    bound_types = 72.0 * log_inv_eps
    cap = config.max_types()
    graph = initial_graph or InfluenceGraph.path(initial_types)
    items = [(config, graph, start, trial_seed(root_seed, 2 * i),
              trial_seed(root_seed, 2 * i + 1), bound_types, cap)
             for i in range(trials)]
    artifacts = _pmap(_type_bound_trial, items, jobs)
    successes = sum(1 for a in artifacts if a["success"])
    bound = 1.0 - 3.0 * config.epsilon
    extras = {"type_bound": bound_types, "hard_cap": cap,
              "cap_violations": sum(1 for a in artifacts if not a["cap_ok"]),
              "max_final_types": max(a["final_types"] for a in artifacts),
              "start": start}
    return _finish(successes, trials, bound, artifacts, extras,
                   vacuous=bound_types >= cap)


# -- per-step potential bounds -------------------------------------------------------

@dataclass
class PhiBoundsReport:
    steps: int
    migration_checks: int
    birth_checks: int
    migration_bound: float            # 2*alpha_min*eps*delta^3
    birth_bound: float                # 2*beta_max
    violations: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json_dict(self) -> dict:
        return {"steps": self.steps, "migration_checks": self.migration_checks,
                "birth_checks": self.birth_checks,
                "migration_bound": self.migration_bound,
                "birth_bound": self.birth_bound,
                "violations": self.violations, "ok": self.ok}


def verify_phi_bounds(timeline: Timeline, config: EvolutionConfig,
                      atol: float = 1e-12) -> PhiBoundsReport:
    """Check the per-phase potential bounds on a finished run.

    Every migration phase that moved mass while all types held at least
    epsilon must have raised the potential by at least 2*alpha_min*eps*
    delta^3; every birth may lower it by at most 2*beta_max.
    """
    alpha_min, _ = config.assignment.alpha_bounds()
    migration_bound = 2.0 * alpha_min * config.epsilon * config.delta**3
    birth_bound = 2.0 * config.beta_max
    migration_checks = birth_checks = 0
    violations = []
    for r in timeline:
        if r.migration_active and r.min_mass_before >= config.epsilon:
            migration_checks += 1
            gain = r.phi_after_migration - r.phi_before
            if gain < migration_bound - atol:
                violations.append({"step": r.step, "kind": "migration",
                                   "delta_phi": gain, "bound": migration_bound})
        if r.birth is not None:
            birth_checks += 1
            drop = r.phi_after_migration - r.phi_after_birth
            if drop > birth_bound + atol:
                violations.append({"step": r.step, "kind": "birth",
                                   "delta_phi": -drop, "bound": birth_bound})
    return PhiBoundsReport(len(timeline), migration_checks, birth_checks,
                           migration_bound, birth_bound, violations)


# -- birth-count concentration ----------------------------------------------------

def verify_birth_counts(config: EvolutionConfig, trials: int,
                        initial_graph: InfluenceGraph | None = None,
                        root_seed: int = 0, jobs: int = 1) -> dict:
    """Empirical check of the Chernoff bounds on births over the horizon.

    Returns both one-sided stats: births >= t*p/2 against 1-e^(-tp/8), and
    births <= 3*t*p/2 against 1-e^(-tp/6).
    """
    graph = initial_graph or InfluenceGraph.path(4)
    t, p = config.horizon, config.p
    items = [(config, graph, trial_seed(root_seed, 2 * i),
              trial_seed(root_seed, 2 * i + 1), 0) for i in range(trials)]
    artifacts = _pmap(_evolution_trial, items, jobs)
    births = np.array([a["births"] for a in artifacts])
    low_ok = int(np.sum(births >= t * p / 2.0))
    high_ok = int(np.sum(births <= 3.0 * t * p / 2.0))
    lower = _finish(low_ok, trials, 1.0 - math.exp(-t * p / 8.0), [],
                    {"threshold": t * p / 2.0, "side": "at_least"})
    upper = _finish(high_ok, trials, 1.0 - math.exp(-t * p / 6.0), [],
                    {"threshold": 3.0 * t * p / 2.0, "side": "at_most"})
    return {"lower": lower, "upper": upper,
            "mean_births": float(births.mean()), "trials": trials}
