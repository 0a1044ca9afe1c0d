"""Configuration-model multigraphs built by uniform stub pairing.

Nodes and stubs are 0-indexed internally; text exports are 1-indexed.
Stubs of node j occupy the contiguous index range offsets[j]:offsets[j+1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from pathlib import Path

import numpy as np

from .degree_model import DegreeLaw, size_biased_offspring

INF = math.inf


@dataclass(frozen=True)
class DegreeSequence:
    degrees: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.degrees, dtype=np.int64)
        if d.ndim != 1 or d.size < 1 or (d < 0).any():
            raise ValueError("degree sequence must be a nonempty vector of nonnegative integers")
        d.setflags(write=False)
        object.__setattr__(self, "degrees", d)

    @property
    def N(self) -> int:
        return int(self.degrees.size)

    @cached_property
    def L(self) -> int:
        return int(self.degrees.sum())

    @cached_property
    def offsets(self) -> np.ndarray:
        off = np.concatenate(([0], np.cumsum(self.degrees)))
        off.setflags(write=False)
        return off

    @cached_property
    def stub_node(self) -> np.ndarray:
        node = np.repeat(np.arange(self.N), self.degrees)
        node.setflags(write=False)
        return node


def sample_degree_sequence(law: DegreeLaw, N: int, rng) -> DegreeSequence:
    """N i.i.d. degrees; if the total is odd the last node gets one extra stub."""
    if N < 1:
        raise ValueError("N must be at least 1")
    d = law.sample(rng, N)
    if d.sum() % 2:
        d[-1] += 1
    return DegreeSequence(d)


@dataclass(frozen=True)
class StubGraph:
    seq: DegreeSequence
    partner: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.partner, dtype=np.int64)
        p.setflags(write=False)
        object.__setattr__(self, "partner", p)

    @property
    def N(self) -> int:
        return self.seq.N

    @property
    def degrees(self) -> np.ndarray:
        return self.seq.degrees

    def validate(self) -> None:
        L = self.seq.L
        p = self.partner
        if p.size != L:
            raise ValueError("pairing length does not match the number of stubs")
        idx = np.arange(L)
        if L and ((p[p] != idx).any() or (p == idx).any()):
            raise ValueError("pairing is not a fixed-point-free involution")

    def adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR (indptr, neighbour node per stub); loops and multi-edges kept."""
        return self.seq.offsets, self.seq.stub_node[self.partner]

    def edges(self) -> np.ndarray:
        """One row (u, v) per edge, u from the lower-numbered stub."""
        s = np.flatnonzero(np.arange(self.partner.size) < self.partner)
        node = self.seq.stub_node
        return np.column_stack((node[s], node[self.partner[s]]))


def pair_stubs(seq: DegreeSequence, rng) -> StubGraph:
    """Uniform perfect matching of all stubs.

    A uniform permutation split into consecutive pairs has the same law as
    pairing the first free stub with a uniform remaining stub, repeatedly.
    """
    L = seq.L
    if L % 2:
        raise ValueError(f"total degree {L} is odd; apply the evenness fix first")
    perm = rng.permutation(L)
    partner = np.empty(L, dtype=np.int64)
    partner[perm[0::2]] = perm[1::2]
    partner[perm[1::2]] = perm[0::2]
    return StubGraph(seq, partner)


def pair_stubs_sequential(seq: DegreeSequence, rng) -> StubGraph:
    """Literal sequential pairing: lowest free stub meets a uniform free stub.

    O(L^2) in the worst case; kept as the reference for small graphs.
    """
    L = seq.L
    if L % 2:
        raise ValueError(f"total degree {L} is odd; apply the evenness fix first")
    free = list(range(L))
    partner = np.empty(L, dtype=np.int64)
    while free:
        s = free.pop(0)
        t = free.pop(int(rng.integers(0, len(free))))
        partner[s], partner[t] = t, s
    return StubGraph(seq, partner)


def graph_from_pairs(degrees, pairs) -> StubGraph:
    """Build a graph from explicit 0-indexed stub pairs (for fixtures)."""
    seq = DegreeSequence(np.asarray(degrees))
    partner = np.full(seq.L, -1, dtype=np.int64)
    for s, t in pairs:
        partner[s], partner[t] = t, s
    g = StubGraph(seq, partner)
    g.validate()
    return g


def _gather(indptr: np.ndarray, indices: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    starts = indptr[nodes]
    lens = indptr[nodes + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    shift = np.repeat(starts - np.concatenate(([0], np.cumsum(lens)[:-1])), lens)
    return indices[shift + np.arange(total)]


def bfs_distances(g: StubGraph, source: int, target: int | None = None) -> np.ndarray:
    """Level-synchronous BFS; -1 marks unreached nodes."""
    indptr, indices = g.adjacency()
    dist = np.full(g.N, -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source])
    d = 0
    while frontier.size:
        if target is not None and dist[target] >= 0:
            break
        nb = _gather(indptr, indices, frontier)
        nb = np.unique(nb[dist[nb] < 0])
        d += 1
        dist[nb] = d
        frontier = nb
    return dist


def hopcount(g: StubGraph, u: int, v: int):
    """Graph distance between u and v, or INF when they are disconnected."""
    if u == v:
        return 0
    d = bfs_distances(g, u, target=v)[v]
    return int(d) if d >= 0 else INF


@dataclass(frozen=True)
class ComponentSummary:
    sizes: np.ndarray
    N: int

    @property
    def largest_fraction(self) -> float:
        return float(self.sizes[0]) / self.N

    @property
    def second_largest(self) -> int:
        return int(self.sizes[1]) if self.sizes.size > 1 else 0


def component_labels(g: StubGraph) -> np.ndarray:
    """Union-find with hooking onto the smaller root and full path compression.

    Vectorised over all edges: each round hooks every edge whose endpoints
    have different roots, then compresses until every node points at a root.
    """
    parent = np.arange(g.N)
    e = g.edges()
    a, b = e[:, 0], e[:, 1]
    keep = a != b
    a, b = a[keep], b[keep]
    while a.size:
        ra, rb = parent[a], parent[b]
        diff = ra != rb
        if not diff.any():
            break
        a, b, ra, rb = a[diff], b[diff], ra[diff], rb[diff]
        np.minimum.at(parent, np.maximum(ra, rb), np.minimum(ra, rb))
        while True:
            nxt = parent[parent]
            if np.array_equal(nxt, parent):
                break
            parent = nxt
    return parent


def components(g: StubGraph) -> ComponentSummary:
    sizes = np.bincount(component_labels(g), minlength=g.N)
    sizes = np.sort(sizes[sizes > 0])[::-1]
    return ComponentSummary(sizes=sizes, N=g.N)


def components_bfs(g: StubGraph) -> ComponentSummary:
    """Repeated BFS; the slow independent check for ``components``."""
    seen = np.zeros(g.N, dtype=bool)
    sizes = []
    for s in range(g.N):
        if not seen[s]:
            reach = bfs_distances(g, s) >= 0
            seen |= reach
            sizes.append(int(reach.sum()))
    return ComponentSummary(sizes=np.array(sorted(sizes, reverse=True)), N=g.N)


@dataclass(frozen=True)
class EmpiricalOffspring:
    g: np.ndarray
    nu_N: float
    p_N: float


def empirical_offspring(seq: DegreeSequence, law: DegreeLaw) -> EmpiricalOffspring:
    """g^N_j = (j+1) #{i: D_i = j+1} / L_N, its mean, and its half-L1 distance to g."""
    L = seq.L
    if L <= 0:
        raise ValueError("empirical offspring law needs a positive total degree")
    counts = np.bincount(seq.degrees)
    j = np.arange(counts.size - 1)
    gN = (j + 1) * counts[1:] / L
    nu_N = float(np.dot(j, gN))
    g = size_biased_offspring(law)
    gj = g.head[: j.size]
    if j.size > g.head.size:
        gj = np.concatenate((gj, [g.pmf(int(k)) for k in j[g.head.size:]]))
    beyond = max(0.0, 1.0 - math.fsum(gj))
    p_N = 0.5 * (math.fsum(np.abs(gN - gj)) + beyond)
    return EmpiricalOffspring(g=gN, nu_N=nu_N, p_N=p_N)


def degree_cap(N: int, eps: float) -> int:
    """ceil(N^{1/4 - eps}) - 1, robust to float noise at exact powers."""
    x = N ** (0.25 - eps)
    r = round(x)
    if abs(x - r) < 1e-9:
        x = r
    return math.ceil(x) - 1


def truncate_graph(g: StubGraph, eps: float, rng) -> tuple[StubGraph, int]:
    """Remove edges until every degree is at most ceil(N^{1/4-eps}) - 1.

    First edges whose two endpoints both exceed the cap are removed in
    uniformly random order, then edges touching a node still above the cap.
    Eligibility only ever shrinks, so scanning a uniform permutation and
    skipping ineligible edges picks a uniform eligible edge at every step.
    A self-loop counts twice towards its node's degree.
    """
    if not 0 < eps < 0.25:
        raise ValueError("eps must lie in (0, 1/4)")
    cap = degree_cap(g.N, eps)
    deg = g.degrees.copy()
    if (deg <= cap).all():
        return g, 0
    stub_node = g.seq.stub_node
    s = np.flatnonzero(np.arange(g.partner.size) < g.partner)
    t = g.partner[s]
    u, v = stub_node[s], stub_node[t]
    high = deg > cap
    removed = np.zeros(s.size, dtype=bool)

    def sweep(candidates, both):
        for e in candidates[rng.permutation(candidates.size)]:
            a, b = u[e], v[e]
            hit = (deg[a] > cap and deg[b] > cap) if both else (deg[a] > cap or deg[b] > cap)
            if hit:
                removed[e] = True
                deg[a] -= 1
                deg[b] -= 1

    sweep(np.flatnonzero(high[u] & high[v]), both=True)
    sweep(np.flatnonzero((high[u] | high[v]) & ~removed), both=False)

    kept = np.ones(g.partner.size, dtype=bool)
    kept[s[removed]] = False
    kept[t[removed]] = False
    newidx = np.cumsum(kept) - 1
    partner = newidx[g.partner[kept]]
    return StubGraph(DegreeSequence(deg), partner), int(removed.sum())


@dataclass(frozen=True)
class WellBehavedReport:
    cond1_deviation: float
    cond1_ok: bool
    i_star: int | None
    cond2_ok: bool
    max_degree: int
    degree_cap: int
    cap_ok: bool
    d: np.ndarray


def check_well_behaved(seq: DegreeSequence, law: DegreeLaw, eps_prime: float,
                       eps: float = 0.05) -> WellBehavedReport:
    """Molloy-Reed style diagnostics on the degree counts d_i(N)."""
    if not eps_prime > 0:
        raise ValueError("eps_prime must be positive")
    N = seq.N
    d = np.bincount(seq.degrees)
    K = max(d.size - 1, law.truncation())
    i = np.arange(K + 1)
    emp = np.zeros(K + 1)
    emp[: d.size] = d / N
    lam = law.pmf(i)
    w = i * (i - 2.0)
    dev = float(np.max(np.abs(w * emp - w * lam)))
    m = law.moments()
    target = m.mu * (m.nu - 1)  # sum_i i(i-2) lambda_i = E[D^2] - 2 E[D]
    partial = np.cumsum(w * emp)
    ok = np.flatnonzero(np.abs(partial[1:] - target) <= eps_prime)
    i_star = int(ok[0]) + 1 if ok.size else None
    cap = degree_cap(N, eps)
    mx = int(seq.degrees.max())
    return WellBehavedReport(
        cond1_deviation=dev, cond1_ok=dev < eps_prime,
        i_star=i_star, cond2_ok=i_star is not None,
        max_degree=mx, degree_cap=cap, cap_ok=mx <= cap, d=d,
    )


def non_attachment_prob(n: int, m: int, L: int, exact: bool | None = None):
    """P(no stub of a set of n attaches to a disjoint set of m) under uniform pairing.

    Bottom-up over the recursion that conditions on whether the first
    stub of the n-set pairs inside the set.  Exact rationals for L <= 64
    unless ``exact`` says otherwise.
    """
    if n < 0 or m < 0 or n + m > L or L % 2:
        raise ValueError(f"inconsistent arguments n={n}, m={m}, L={L}")
    if exact is None:
        exact = L <= 64
    one = Fraction(1) if exact else 1.0
    prev: dict[int, object] = {}
    for t in range(n, -1, -1):
        Lt = L - 2 * t
        cur = {}
        for k in range(max(0, n - 2 * t), n - t + 1):
            if k == 0:
                cur[k] = one
                continue
            if k + m > Lt:
                cur[k] = 0 * one
                continue
            val = 0 * one
            if k >= 2:
                val += one * (k - 1) / (Lt - 1) * prev[k - 2]
            c = one - one * (m + k - 1) / (Lt - 1)
            if c:
                val += c * prev[k - 1]
            cur[k] = val
        prev = cur
    return prev[n]


def write_edge_list(g: StubGraph, path) -> None:
    e = g.edges() + 1
    Path(path).write_text("".join(f"{a} {b}\n" for a, b in e))


def write_degree_sequence(seq: DegreeSequence, path) -> None:
    Path(path).write_text("".join(f"{d}\n" for d in seq.degrees))


def read_degree_sequence(path) -> DegreeSequence:
    return DegreeSequence(np.array([int(x) for x in Path(path).read_text().split()], dtype=np.int64))
