"""Agent networks: generation, validation, incidence spectra, penalty bound.

A network is an undirected graph over reliable and Byzantine agents.  The
update rules never weight neighbors, but the attack formulas and the
averaging baselines need a doubly-stochastic weight matrix, so Metropolis
weights are built here and carried on the topology.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from byzopt import rngstream

WEIGHT_TOL = 1e-12
SINGULAR_REL_TOL = 1e-10


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    """Undirected agent network; immutable after construction."""

    m: int
    byzantine: frozenset
    edges: tuple  # sorted (i, j) pairs with i < j, lexicographically ordered
    weights: np.ndarray = field(repr=False)
    reliable: frozenset = field(init=False)
    reliable_edges: tuple = field(init=False)

    def __post_init__(self):
        if not all(0 <= b < self.m for b in self.byzantine):
            raise TopologyError("Byzantine ids out of range")
        object.__setattr__(self, "reliable", frozenset(range(self.m)) - self.byzantine)
        for (i, j) in self.edges:
            if i == j:
                raise TopologyError(f"self-loop on agent {i}")
            if not (0 <= i < j < self.m):
                raise TopologyError(f"bad edge ({i}, {j})")
        rel_edges = tuple(e for e in self.edges if e[0] in self.reliable and e[1] in self.reliable)
        object.__setattr__(self, "reliable_edges", rel_edges)
        object.__setattr__(self, "edges", tuple(sorted(self.edges)))
        self._check_weights()
        self.weights.setflags(write=False)

    def _check_weights(self):
        w = self.weights
        if w.shape != (self.m, self.m):
            raise TopologyError("weight matrix shape mismatch")
        if not np.allclose(w, w.T, atol=WEIGHT_TOL):
            raise TopologyError("weight matrix not symmetric")
        if np.any(w < -WEIGHT_TOL):
            raise TopologyError("negative weights")
        ones = np.ones(self.m)
        if np.max(np.abs(w @ ones - ones)) > WEIGHT_TOL:
            raise TopologyError("weight rows do not sum to 1")
        edge_set = set(self.edges)
        for i in range(self.m):
            for j in range(i + 1, self.m):
                on_edge = (i, j) in edge_set
                if on_edge and w[i, j] <= 0:
                    raise TopologyError(f"zero weight on edge ({i}, {j})")
                if not on_edge and abs(w[i, j]) > WEIGHT_TOL:
                    raise TopologyError(f"nonzero weight off edge ({i}, {j})")

    def neighbors(self, i):
        """Sorted neighbor ids of agent i (excluding i itself)."""
        out = [j for (a, j) in self.edges if a == i] + [a for (a, j) in self.edges if j == i]
        return sorted(out)

    def degree(self, i):
        return len(self.neighbors(i))

    def reliable_neighbors(self, i):
        return [j for j in self.neighbors(i) if j in self.reliable]

    def byzantine_neighbors(self, i):
        return [j for j in self.neighbors(i) if j in self.byzantine]


def metropolis_weights(m, edges):
    """Doubly-stochastic weights: w_ij = 1/(1 + max(deg_i, deg_j)) on edges,
    diagonal absorbing the remainder."""
    deg = np.zeros(m, dtype=int)
    for (i, j) in edges:
        deg[i] += 1
        deg[j] += 1
    w = np.zeros((m, m))
    for (i, j) in edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    for i in range(m):
        w[i, i] = 1.0 - w[i].sum()
    return w


def make_topology(m, edges, byzantine=()):
    """Topology from an explicit edge list, with Metropolis weights."""
    edges = tuple(sorted((min(i, j), max(i, j)) for (i, j) in edges))
    return Topology(m=m, byzantine=frozenset(byzantine), edges=edges,
                    weights=metropolis_weights(m, edges))


def gen_erdos_renyi(m, edge_prob, byz_count, seed, require_connected=True):
    """Random G(m, p) network with a uniformly drawn Byzantine set.

    Edge indicators are drawn once from the seed in lexicographic pair order.
    The Byzantine set is redrawn with per-attempt sub-seeds (at most 100)
    until the induced reliable subgraph is connected; a TopologyError is
    raised when no attempt succeeds.  ``require_connected=False`` returns the
    first draw unchecked.
    """
    if not 0 <= byz_count < m:
        raise TopologyError(f"byz_count must satisfy 0 <= byz_count < m, got {byz_count} for m={m}")
    if not 0.0 <= edge_prob <= 1.0:
        raise TopologyError(f"edge_prob must be in [0, 1], got {edge_prob}")
    rng = rngstream.stream(seed, 0)
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    draws = rng.random(len(pairs))
    edges = tuple(p for p, u in zip(pairs, draws) if u < edge_prob)

    attempts = 1 if not require_connected else 100
    for attempt in range(attempts):
        byz_rng = rngstream.stream(seed, rngstream.BYZ_RETRY, attempt)
        byz = frozenset(byz_rng.choice(m, size=byz_count, replace=False).tolist())
        topo = Topology(m=m, byzantine=byz, edges=edges, weights=metropolis_weights(m, edges))
        if not require_connected or reliable_connected(topo):
            return topo
    raise TopologyError(
        "reliable subgraph disconnected after 100 Byzantine redraws; "
        "every run requires a bidirectionally connected reliable network")


def reliable_connected(t: Topology) -> bool:
    """True iff the subgraph induced on the reliable agents is connected."""
    rel = sorted(t.reliable)
    if not rel:
        return False
    adj = {i: [] for i in rel}
    for (i, j) in t.reliable_edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {rel[0]}
    frontier = [rel[0]]
    while frontier:
        nxt = []
        for i in frontier:
            for j in adj[i]:
                if j not in seen:
                    seen.add(j)
                    nxt.append(j)
        frontier = nxt
    return len(seen) == len(rel)


@dataclass(frozen=True)
class IncidenceMatrix:
    """Signed node-edge incidence matrix of the reliable subgraph.

    Rows follow sorted reliable ids; columns follow (min, max)-lexicographic
    edge order with +1 at the smaller endpoint and -1 at the larger.
    """

    pi: np.ndarray
    lambda_min: float
    lambda_max: float
    reliable_ids: tuple
    edge_order: tuple


def incidence(t: Topology) -> IncidenceMatrix:
    """Incidence matrix and its extreme nonzero singular values."""
    if not reliable_connected(t):
        raise TopologyError("incidence requires a connected reliable subgraph")
    rel = sorted(t.reliable)
    row = {a: r for r, a in enumerate(rel)}
    edges = tuple(sorted(t.reliable_edges))
    pi = np.zeros((len(rel), len(edges)))
    for c, (i, j) in enumerate(edges):
        pi[row[i], c] = 1.0
        pi[row[j], c] = -1.0
    if len(edges) == 0:
        # single reliable agent: no edges, no spectrum
        return IncidenceMatrix(pi=pi, lambda_min=0.0, lambda_max=0.0,
                               reliable_ids=tuple(rel), edge_order=edges)
    svals = np.linalg.svd(pi, compute_uv=False)
    lam_max = float(svals[0])
    nonzero = svals[svals > SINGULAR_REL_TOL * lam_max]
    return IncidenceMatrix(pi=pi, lambda_min=float(nonzero[-1]), lambda_max=lam_max,
                           reliable_ids=tuple(rel), edge_order=edges)


def min_penalty(inc: IncidenceMatrix, grads_at_opt, n_edges_reliable) -> float:
    """Smallest penalty weight certifying consensus equivalence.

    |R|^{3/2} * sqrt(|E_R|) * max_i ||residual_i||_inf / lambda_min, where
    residual_i is agent i's smooth gradient plus the shared non-smooth
    subgradient, both at the centralized optimum.
    """
    if inc.lambda_min <= 0:
        raise TopologyError("min_penalty requires lambda_min > 0")
    if n_edges_reliable != inc.pi.shape[1]:
        raise TopologyError("n_edges_reliable does not match the incidence matrix")
    n_rel = inc.pi.shape[0]
    max_inf = max(float(np.max(np.abs(g))) for g in grads_at_opt)
    return n_rel ** 1.5 * np.sqrt(n_edges_reliable) * max_inf / inc.lambda_min


def consensus_certificate(inc: IncidenceMatrix, psi, phi, b_norm):
    """Least-squares edge multipliers certifying the consensus fixed point.

    Solves penalty * Pi @ y = -psi per coordinate through the Moore-Penrose
    pseudo-inverse.  The certificate is valid when the residual vanishes
    (relative to psi's scale) and every per-edge multiplier has dual norm at
    most one.  Returns (y, valid); an invalid certificate is a legitimate
    outcome, not an error.
    """
    if phi <= 0:
        raise ValueError("penalty must be positive")
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    if psi.shape[0] != inc.pi.shape[0]:
        psi = psi.T
    y = -np.linalg.pinv(inc.pi) @ psi / phi  # (|E_R|, n), per-coordinate solve
    residual = np.max(np.abs(inc.pi @ y * phi + psi))
    res_ok = residual <= 1e-8 * max(1.0, float(np.max(np.abs(psi))))
    if np.isinf(b_norm):
        norms = np.max(np.abs(y), axis=1) if y.size else np.zeros(0)
    else:
        norms = np.linalg.norm(y, ord=b_norm, axis=1) if y.size else np.zeros(0)
    norm_ok = bool(np.all(norms <= 1.0 + 1e-10))
    return y, (res_ok and norm_ok)


def save_topology(t: Topology, path):
    """Plain-text format: "m byz_count", one "i j" line per edge, then the
    Byzantine id list (line omitted when there are none)."""
    lines = [f"{t.m} {len(t.byzantine)}"]
    lines += [f"{i} {j}" for (i, j) in t.edges]
    if t.byzantine:
        lines.append(" ".join(str(b) for b in sorted(t.byzantine)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_topology(path) -> Topology:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    m, byz_count = (int(x) for x in lines[0].split())
    byz = []
    edge_lines = lines[1:]
    if byz_count > 0:
        byz = [int(x) for x in lines[-1].split()]
        if len(byz) != byz_count:
            raise TopologyError(f"expected {byz_count} Byzantine ids, got {len(byz)}")
        edge_lines = lines[1:-1]
    edges = [tuple(int(x) for x in ln.split()) for ln in edge_lines]
    return make_topology(m, edges, byz)
