"""Shared fixtures-by-hand: random problem setups and independent oracles."""

import numpy as np

from opinionflow import (InfluenceAssignment, InfluenceGraph, PopulationState,
                         cubic, linear, soft)


def edge_state(xu, xv):
    g = InfluenceGraph([0, 1], [(0, 1)])
    return PopulationState.from_masses(g, [xu, xv])


def path_acb():
    """3-path with endpoints 0, 1 and middle 2 (the A-C-B layout)."""
    return InfluenceGraph([0, 1, 2], [(0, 2), (1, 2)])


def flow_oracle(masses, u, v, family, a):
    """Independent re-evaluation of the flow formula (no package code)."""
    d = masses[u] - masses[v]
    if family == "linear":
        F = a * d
    elif family == "cubic":
        F = a * d**3
    elif family == "soft":
        F = a * d / (1 + abs(d))
    else:
        raise ValueError(family)
    return masses[u] * masses[v] * F


def random_setup(rng, n_max=16, diffeo=False):
    """Random (state, assignment, family, a) with simplex- or diffeo-admissible F."""
    n = int(rng.integers(2, n_max + 1))
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.35]
    g = InfluenceGraph(range(n), edges)
    family = ("linear", "cubic", "soft")[rng.integers(3)]
    if diffeo:
        a = {"linear": rng.uniform(0.05, 0.49), "cubic": rng.uniform(0.05, 0.49),
             "soft": rng.uniform(0.1, 0.98)}[family]
    else:
        a = {"linear": rng.uniform(0.05, 1.0), "cubic": rng.uniform(0.05, 1.0),
             "soft": rng.uniform(0.1, 2.0)}[family]
    f = {"linear": linear, "cubic": cubic, "soft": soft}[family](a)
    draws = rng.exponential(size=n)
    x = draws / draws.sum()
    state = PopulationState(g, tuple(range(n)), x)
    return state, InfluenceAssignment(f), family, a


def match_multisets(a, b, tol):
    """Greedy nearest-neighbor matching of two complex multisets."""
    a = list(a)
    b = list(b)
    assert len(a) == len(b)
    for za in a:
        dists = [abs(za - zb) for zb in b]
        k = int(np.argmin(dists))
        assert dists[k] < tol, f"eigenvalue {za} unmatched (best {dists[k]:g})"
        b.pop(k)


def connected_graph_atlas(n_max):
    """All connected graphs on 1..n_max vertices, one per isomorphism class.

    Graphs are edge-bitmasks canonicalized by minimizing over all vertex
    permutations (vectorized over the whole mask space); returned as
    (n, edge list) pairs.
    """
    import itertools

    atlas = []
    for n in range(1, n_max + 1):
        pairs = list(itertools.combinations(range(n), 2))
        m_bits = len(pairs)
        bit_of = {e: k for k, e in enumerate(pairs)}
        masks = np.arange(1 << m_bits, dtype=np.int64)
        bits = (masks[:, None] >> np.arange(m_bits)) & 1       # (2^M, M)
        canon = masks.copy()
        for p in itertools.permutations(range(n)):
            pm = np.array([bit_of[tuple(sorted((p[u], p[v])))] for u, v in pairs],
                          dtype=np.int64)
            canon = np.minimum(canon, bits @ (np.int64(1) << pm))

        def is_connected(mask):
            adj = [0] * n
            for k, (u, v) in enumerate(pairs):
                if mask >> k & 1:
                    adj[u] |= 1 << v
                    adj[v] |= 1 << u
            seen = frontier = 1
            while frontier:
                nxt = 0
                for u in range(n):
                    if frontier >> u & 1:
                        nxt |= adj[u]
                frontier = nxt & ~seen
                seen |= nxt
            return seen == (1 << n) - 1

        for rep in np.unique(canon):
            rep = int(rep)
            if is_connected(rep):
                atlas.append((n, [pairs[k] for k in range(m_bits) if rep >> k & 1]))
    return atlas
