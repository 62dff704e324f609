"""The deterministic migration map on the population simplex.

Each step moves mass x_u*x_v*F_uv(x_u - x_v) into the larger endpoint of
every edge, simultaneously for all edges, from the current state. The sum
of squares of the masses acts as a global potential: it never decreases,
and strictly increases off fixed points, which is what drives every
trajectory to a fixed point.

Defaults pinned here and used package-wide:
  TOL_STEP   = 1e-10  L1 step size below which a trajectory counts as converged
  TOL_FLOW   = 1e-12  max |edge flow| below which a state counts as fixed
  THETA_ACTIVE = 1e-9 mass above which a type counts as active
  MAX_ITERS  = 10**6
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import NotAFixedPointError
from .graph import InfluenceGraph
from .influence import InfluenceAssignment

TOL_STEP = 1e-10
TOL_FLOW = 1e-12
THETA_ACTIVE = 1e-9
MAX_ITERS = 10**6

_RENORM_TOL = 1e-12


@dataclass
class PopulationState:
    """Masses on the simplex, tied to a graph snapshot.

    ``ids`` is the sorted vertex list of the graph at construction time and
    fixes the coordinate order of ``x``.
    """

    graph: InfluenceGraph
    ids: tuple[int, ...]
    x: np.ndarray
    t: int = 0

    @classmethod
    def from_masses(cls, graph: InfluenceGraph,
                    masses: Mapping[int, float] | Sequence[float],
                    t: int = 0, normalize: bool = False) -> "PopulationState":
        ids = tuple(graph.vertex_list())
        if isinstance(masses, Mapping):
            missing = set(ids) - set(masses)
            extra = set(masses) - set(ids)
            if missing or extra:
                raise ValueError(f"mass keys do not match graph (missing={missing}, extra={extra})")
            x = np.array([float(masses[v]) for v in ids])
        else:
            x = np.asarray(masses, dtype=float).copy()
            if x.shape != (len(ids),):
                raise ValueError(f"expected {len(ids)} masses, got {x.shape}")
        if np.any(x < 0) or np.any(x > 1):
            raise ValueError("masses must lie in [0, 1]")
        total = x.sum()
        if normalize:
            if total <= 0:
                raise ValueError("cannot normalize all-zero masses")
            x /= total
        elif abs(total - 1.0) > 1e-9:
            raise ValueError(f"masses must sum to 1 (got {total!r})")
        return cls(graph, ids, x, t)

    @classmethod
    def uniform(cls, graph: InfluenceGraph, t: int = 0) -> "PopulationState":
        n = len(graph)
        return cls(graph, tuple(graph.vertex_list()), np.full(n, 1.0 / n), t)

    def index_of(self, v: int) -> int:
        try:
            return self.ids.index(v)
        except ValueError:
            raise ValueError(f"unknown vertex id {v}") from None

    def mass(self, v: int) -> float:
        return float(self.x[self.index_of(v)])

    def as_dict(self) -> dict[int, float]:
        return {v: float(m) for v, m in zip(self.ids, self.x)}

    def active_set(self, theta_active: float = THETA_ACTIVE) -> set[int]:
        if theta_active <= 0:
            raise ValueError("theta_active must be positive")
        return {v for v, m in zip(self.ids, self.x) if m > theta_active}


class _EdgeKernel:
    """Vectorized edge evaluation for one (graph, assignment) snapshot.

    Edges are grouped by influence family so that the per-step work is a
    handful of array operations regardless of how many edges share a family.
    Rebuilt whenever the graph version changes.
    """

    def __init__(self, graph: InfluenceGraph, assignment: InfluenceAssignment):
        self.graph = graph
        self.assignment = assignment
        self.version = graph.version
        self.ids = tuple(graph.vertex_list())
        index = {v: i for i, v in enumerate(self.ids)}
        edges = graph.edges()
        self.n = len(self.ids)
        self.m = len(edges)
        self.iu = np.array([index[u] for u, v in edges], dtype=np.intp)
        self.iv = np.array([index[v] for u, v in edges], dtype=np.intp)
        groups: dict[int, tuple] = {}
        order: list[tuple] = []
        for e, (u, v) in enumerate(edges):
            f = assignment.function_for(u, v)
            if id(f) not in groups:
                groups[id(f)] = (f, [])
                order.append(groups[id(f)])
            groups[id(f)][1].append(e)
        self._groups = [(f, np.array(idx, dtype=np.intp)) for f, idx in order]

    def values(self, d: np.ndarray) -> np.ndarray:
        """F_uv(d) per edge."""
        if len(self._groups) == 1:
            return np.asarray(self._groups[0][0]._eval_unchecked(d), dtype=float)
        out = np.empty_like(d)
        for f, idx in self._groups:
            out[idx] = f._eval_unchecked(d[idx])
        return out

    def derivs(self, d: np.ndarray) -> np.ndarray:
        """F'_uv(d) per edge."""
        if len(self._groups) == 1:
            return np.asarray(self._groups[0][0]._deriv_unchecked(d), dtype=float)
        out = np.empty_like(d)
        for f, idx in self._groups:
            out[idx] = f._deriv_unchecked(d[idx])
        return out

    def flows(self, x: np.ndarray, delta: float = 0.0) -> np.ndarray:
        """Per-edge flow into the u endpoint: x_u*x_v*F_uv(x_u-x_v).

        A positive dead-zone zeroes every edge whose mass difference does
        not exceed delta.
        """
        d = x[self.iu] - x[self.iv]
        flows = x[self.iu] * x[self.iv] * self.values(d)
        if delta > 0.0 and self.m:
            flows[np.abs(d) <= delta] = 0.0
        return flows

    def net(self, flows: np.ndarray) -> np.ndarray:
        """Net inflow per vertex from per-edge flows."""
        if self.m == 0:
            return np.zeros(self.n)
        return (np.bincount(self.iu, weights=flows, minlength=self.n)
                - np.bincount(self.iv, weights=flows, minlength=self.n))

    def raw_update(self, x: np.ndarray, delta: float = 0.0) -> np.ndarray:
        """One application of the update map, no renormalization."""
        return x + self.net(self.flows(x, delta))


def kernel_for(state: PopulationState, assignment: InfluenceAssignment,
               kernel: _EdgeKernel | None = None) -> _EdgeKernel:
    if (kernel is None or kernel.graph is not state.graph
            or kernel.version != state.graph.version
            or kernel.assignment is not assignment):
        return _EdgeKernel(state.graph, assignment)
    return kernel


def flow(state: PopulationState, u: int, v: int,
         assignment: InfluenceAssignment, delta: float = 0.0) -> float:
    """Mass moving from v into u this step (negative = the other way)."""
    if not state.graph.has_edge(u, v):
        raise ValueError(f"no edge {u}-{v}")
    xu, xv = state.mass(u), state.mass(v)
    d = xu - xv
    if abs(d) <= delta:
        return 0.0
    f = assignment.function_for(u, v)
    return xu * xv * float(f._eval_unchecked(np.asarray(d)))


class StepOutcome(NamedTuple):
    state: PopulationState
    active: bool        # True iff any edge carried nonzero flow
    residual: float     # |sum(x) - 1| before renormalization


def migrate_step(state: PopulationState, assignment: InfluenceAssignment,
                 delta: float = 0.0, kernel: _EdgeKernel | None = None) -> StepOutcome:
    """Apply one synchronous migration step.

    All flows are computed from the current state and applied at once.
    The result is renormalized to cancel float drift; the model itself
    conserves mass, so anything beyond 1e-12 of drift is a real bug and
    raises.
    """
    kernel = kernel_for(state, assignment, kernel)
    flows = kernel.flows(state.x, delta)
    x_new = state.x + kernel.net(flows)
    total = x_new.sum()
    residual = abs(total - 1.0)
    if residual > _RENORM_TOL:
        raise ArithmeticError(f"mass drifted by {residual:g} in one step; "
                              "check that sup|F| <= 1")
    x_new /= total
    active = bool(np.any(flows != 0.0))
    new_state = PopulationState(state.graph, state.ids, x_new, state.t + 1)
    return StepOutcome(new_state, active, residual)


def potential_phi(state: PopulationState) -> float:
    """Sum of squared masses; ranges over [1/n, 1] on the simplex."""
    return float(np.dot(state.x, state.x))


def local_potential_psi(state: PopulationState, p: PopulationState) -> float:
    """Mass deficit of ``state`` on the support of ``p``.

    Near a limit point p this quantity is nonnegative, zero only at p, and
    non-increasing along the trajectory, which is what upgrades set-wise
    convergence to convergence to the single point p.
    """
    if state.ids != p.ids:
        raise ValueError("states live on different vertex sets")
    mask = p.x > 0.0
    return float(np.sum(p.x[mask] - state.x[mask]))


def is_fixed_point(state: PopulationState, assignment: InfluenceAssignment,
                   tol_flow: float = TOL_FLOW, kernel: _EdgeKernel | None = None) -> bool:
    """True iff every edge flow (dead-zone off) is below tol_flow in magnitude."""
    if tol_flow <= 0:
        raise ValueError("tol_flow must be positive")
    kernel = kernel_for(state, assignment, kernel)
    flows = kernel.flows(state.x, 0.0)
    return bool(flows.size == 0 or np.max(np.abs(flows)) < tol_flow)


@dataclass
class ConvergenceResult:
    limit: PopulationState
    iterations: int
    converged: bool
    phi_trace: np.ndarray
    residual_max: float = 0.0
    trajectory: list[np.ndarray] | None = None


def run_to_convergence(x0: PopulationState, assignment: InfluenceAssignment,
                       tol: float = TOL_STEP, max_iters: int = MAX_ITERS,
                       record_trajectory: bool = False,
                       record_phi: bool = True) -> ConvergenceResult:
    """Iterate the migration map (dead-zone off) until the L1 step is < tol.

    ``converged`` is False only when max_iters runs out. phi_trace holds the
    potential at x0 and after every applied step (empty if record_phi is
    off, which bulk sweeps use). The loop works on raw arrays (equivalent
    to repeated migrate_step) to keep long runs cheap.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    kernel = kernel_for(x0, assignment)
    x = x0.x.copy()
    phi_trace = [float(x @ x)] if record_phi else None
    trajectory = [x.copy()] if record_trajectory else None
    residual_max = 0.0
    converged = False
    iterations = max_iters
    for t in range(max_iters):
        x_new = x + kernel.net(kernel.flows(x, 0.0))
        total = x_new.sum()
        residual = abs(total - 1.0)
        if residual > _RENORM_TOL:
            raise ArithmeticError(f"mass drifted by {residual:g} in one step; "
                                  "check that sup|F| <= 1")
        residual_max = max(residual_max, residual)
        x_new /= total
        if phi_trace is not None:
            phi_trace.append(float(x_new @ x_new))
        if trajectory is not None:
            trajectory.append(x_new.copy())
        step_l1 = float(np.abs(x_new - x).sum())
        x = x_new
        if step_l1 < tol:
            converged = True
            iterations = t
            break
    applied = iterations + 1 if converged else max_iters
    limit = PopulationState(x0.graph, x0.ids, x, x0.t + applied)
    return ConvergenceResult(limit, iterations, converged,
                             np.array(phi_trace if phi_trace is not None else []),
                             residual_max, trajectory)


def active_set(state: PopulationState, theta_active: float = THETA_ACTIVE) -> set[int]:
    """Types holding more than theta_active of mass."""
    return state.active_set(theta_active)


@dataclass
class FixedPointClassification:
    components: list[tuple[frozenset[int], float]] = field(default_factory=list)
    independent: bool = True


def classify_fixed_point(state: PopulationState, assignment: InfluenceAssignment,
                         theta_active: float = THETA_ACTIVE,
                         tol_mass: float = 1e-6,
                         tol_flow: float = TOL_FLOW) -> FixedPointClassification:
    """Group the active types of a fixed point into equal-mass components.

    At any fixed point the active types split into connected components of
    the induced subgraph, each internally at a common mass. A spread above
    tol_mass inside a component means the state is not actually fixed.
    """
    if not is_fixed_point(state, assignment, tol_flow):
        raise NotAFixedPointError("state is not a fixed point at tol_flow")
    active = state.active_set(theta_active)
    components = []
    for comp in state.graph.induced_components(active):
        masses = [state.mass(v) for v in comp]
        spread = max(masses) - min(masses)
        if spread >= tol_mass:
            raise NotAFixedPointError(
                f"component {sorted(comp)} has mass spread {spread:g} >= {tol_mass:g}")
        components.append((frozenset(comp), float(np.mean(masses))))
    return FixedPointClassification(components, state.graph.is_independent_set(active))
