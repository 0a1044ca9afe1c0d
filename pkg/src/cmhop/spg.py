"""Shortest-path graph growth with the label 1/2/3 bookkeeping.

Labels: 1 = stub of a node not yet reached, 2 = free stub of a reached
node, 3 = stub already paired.  A draw is a uniform stub index, which is
the same as a draw of a forward degree from the empirical size-biased law.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import INF, DegreeSequence
from .rng import UniformBuffer

FREE, UNSEEN, PAIRED = 2, 1, 3


class CapExceeded(RuntimeError):
    """An exploration hit its configured size cap."""


def default_cap(L: int) -> int:
    """Cap on processed stubs: 10 sqrt(L) log L."""
    if L < 2:
        return 10
    return int(math.ceil(10 * math.sqrt(L) * math.log(L)))


@dataclass
class SpgTrace:
    Z: list[int]
    nodes_at_distance: list[int]
    terminated_reason: str
    n_cycles: int = 0
    n_redraws: int = 0
    label_counts: list[tuple[int, int, int]] = field(default_factory=list)
    events: list[tuple[int, int, int, int, int]] | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CoupledTrace:
    Z: list[int]
    Zhat: list[int]
    miscoupling_generation: int | None
    n_label2: int
    n_label3: int
    terminated_reason: str

    def to_dict(self) -> dict:
        return asdict(self)


class _Labels:
    """Mutable label state shared by the growers."""

    def __init__(self, seq: DegreeSequence):
        self.L = seq.L
        self.offsets = seq.offsets
        self.degrees = seq.degrees
        self.node_of = seq.stub_node
        self.lab = bytearray([UNSEEN]) * self.L
        self.counts = [self.L, 0, 0]  # label 1, 2, 3

    def set(self, s: int, new: int) -> None:
        self.counts[self.lab[s] - 1] -= 1
        self.counts[new - 1] += 1
        self.lab[s] = new

    def reach(self, node: int, entry: int | None, out: list[int]) -> None:
        """Mark node's stubs free (entry stub paired) and append the free ones to ``out``."""
        for b in range(int(self.offsets[node]), int(self.offsets[node + 1])):
            if b == entry:
                self.set(b, PAIRED)
            else:
                self.set(b, FREE)
                out.append(b)


def _draw_unpaired(lab: bytearray, buf: UniformBuffer, L: int) -> tuple[int, int]:
    """Uniform stub with label 1 or 2, by rejection.  Returns (stub, rejections)."""
    r = 0
    while True:
        c = buf.integer(L)
        if lab[c] != PAIRED:
            return c, r
        r += 1


def grow_spg(seq: DegreeSequence, root: int, max_gen: int, rng,
             cap: int | None = None, record: bool = False) -> SpgTrace:
    """Grow the SPG from ``root`` for up to ``max_gen`` generations.

    Z[k-1] is the number of free stubs when generation k starts; free stubs
    of a generation are processed in increasing stub index.
    """
    if max_gen < 1:
        raise ValueError("max_gen must be at least 1")
    if not 0 <= root < seq.N:
        raise ValueError("root out of range")
    st = _Labels(seq)
    cap = default_cap(st.L) if cap is None else cap
    buf = UniformBuffer(rng)
    events = [] if record else None
    cur: list[int] = []
    st.reach(root, None, cur)
    Z = [len(cur)]
    nodes = [1]
    lcounts = [tuple(st.counts)]
    cycles = redraws = processed = 0
    reason = "max_gen"
    gen = 1
    while True:
        if not cur:
            reason = "exhausted"
            break
        if gen >= max_gen:
            reason = "max_gen"
            break
        nxt: list[int] = []
        attached = 0
        capped = False
        for s in sorted(cur):
            if st.lab[s] != FREE:
                continue  # swallowed by a cycle earlier in this generation
            if processed >= cap:
                capped = True
                break
            processed += 1
            st.set(s, PAIRED)
            c, r = _draw_unpaired(st.lab, buf, st.L)
            redraws += r
            lab_c = st.lab[c]
            if lab_c == UNSEEN:
                st.reach(int(st.node_of[c]), c, nxt)
                attached += 1
            else:
                st.set(c, PAIRED)
                cycles += 1
            if record:
                events.append((gen, s, c, lab_c, r))
        if capped:
            reason = "cap"
            break
        cur = [b for b in nxt if st.lab[b] == FREE]
        Z.append(len(cur))
        nodes.append(attached)
        lcounts.append(tuple(st.counts))
        gen += 1
    return SpgTrace(Z, nodes, reason, cycles, redraws, lcounts, events)


def grow_coupled(seq: DegreeSequence, root: int, max_gen: int, rng,
                 cap: int | None = None) -> CoupledTrace:
    """Grow the SPG and its coupled branching process from one draw stream.

    Each draw is a uniform stub c; the BP child gets D(c)-1 free stubs.
    Label 1: both processes attach the node.  Label 2: the SPG closes a
    cycle (two free stubs used), the BP still attaches.  Label 3: the BP
    attaches, the SPG redraws until it hits label 1 or 2.  When one process
    runs out of free stubs in a generation the other finishes alone.
    """
    if max_gen < 1:
        raise ValueError("max_gen must be at least 1")
    if not 0 <= root < seq.N:
        raise ValueError("root out of range")
    st = _Labels(seq)
    L = st.L
    cap = default_cap(L) if cap is None else cap
    buf = UniformBuffer(rng)
    deg = st.degrees
    node_of = st.node_of
    cur: list[int] = []
    st.reach(root, None, cur)
    Z = [len(cur)]
    Zhat = [len(cur)]
    mis = None
    n2 = n3 = 0
    draws = 0
    gen = 1
    reason = "max_gen"

    def spg_step(s: int, c: int, nxt: list[int]) -> None:
        if st.lab[c] == UNSEEN:
            st.reach(int(node_of[c]), c, nxt)
        else:
            st.set(c, PAIRED)

    while True:
        if not cur and Zhat[-1] == 0:
            reason = "exhausted"
            break
        if gen >= max_gen:
            reason = "max_gen"
            break
        if draws + max(len(cur), Zhat[-1]) > cap:
            reason = "cap"
            break
        queue = sorted(cur)
        qi = 0
        bp_left = Zhat[-1]
        nxt: list[int] = []
        bp_next = 0

        def next_free() -> int | None:
            nonlocal qi
            while qi < len(queue):
                s = queue[qi]
                qi += 1
                if st.lab[s] == FREE:
                    return s
            return None

        s = next_free()
        while s is not None and bp_left > 0:
            st.set(s, PAIRED)
            c = buf.integer(L)
            draws += 1
            bp_left -= 1
            bp_next += int(deg[node_of[c]]) - 1
            lab_c = st.lab[c]
            if lab_c == PAIRED:
                n3 += 1
                if mis is None:
                    mis = gen + 1
                c, _ = _draw_unpaired(st.lab, buf, L)
            elif lab_c == FREE:
                n2 += 1
                if mis is None:
                    mis = gen + 1
            spg_step(s, c, nxt)
            s = next_free()
        # SPG out of free stubs: finish the BP generation with free draws
        while bp_left > 0:
            c = buf.integer(L)
            draws += 1
            bp_left -= 1
            bp_next += int(deg[node_of[c]]) - 1
        # BP out of free stubs: finish the SPG generation with redraws
        while s is not None:
            st.set(s, PAIRED)
            c, _ = _draw_unpaired(st.lab, buf, L)
            draws += 1
            spg_step(s, c, nxt)
            s = next_free()
        cur = [b for b in nxt if st.lab[b] == FREE]
        Z.append(len(cur))
        Zhat.append(bp_next)
        gen += 1
    return CoupledTrace(Z, Zhat, mis, n2, n3, reason)


def coupling_error_rate(traces, m: int) -> float:
    """Fraction of traces whose first miscoupling is at generation <= m."""
    if m < 1:
        raise ValueError("m must be at least 1")
    traces = list(traces)
    if not traces:
        raise ValueError("no traces")
    bad = sum(1 for t in traces if t.miscoupling_generation is not None and t.miscoupling_generation <= m)
    return bad / len(traces)


def bilateral_hopcount(seq: DegreeSequence, u: int, v: int, rng, cap: int | None = None):
    """Hopcount between u and v, pairing stubs only as they are explored.

    Breadth-first layers are grown alternately from u and from v; every
    stub met is paired with a uniform unpaired stub, so the explored part
    has the same law as in a fully paired graph.  Returns INF when either
    side's component is exhausted before the two meet.  With ``cap`` set,
    pairing more than ``cap`` stubs raises CapExceeded.
    """
    if u == v:
        raise ValueError("u and v must differ")
    L = seq.L
    off = seq.offsets
    if L == 0:
        return INF
    buf = UniformBuffer(rng)
    partner: dict[int, int] = {}
    owner = np.searchsorted

    limit = math.inf if cap is None else 2 * cap

    def pair(s: int) -> int:
        p = partner.get(s)
        if p is None:
            if len(partner) >= limit:
                raise CapExceeded(f"bilateral search paired more than {cap} stubs")
            while True:
                p = buf.integer(L)
                if p != s and p not in partner:
                    break
            partner[s] = p
            partner[p] = s
        return p

    dist = ({u: 0}, {v: 0})
    front = ([u], [v])
    radius = [0, 0]
    side = 0
    while True:
        if not front[0] or not front[1]:
            return INF
        mine, other = dist[side], dist[1 - side]
        best = INF
        new: list[int] = []
        for x in front[side]:
            for s in range(int(off[x]), int(off[x + 1])):
                y = int(owner(off, pair(s), side="right")) - 1
                dy = other.get(y)
                if dy is not None:
                    best = min(best, radius[side] + 1 + dy)
                if y not in mine:
                    mine[y] = radius[side] + 1
                    new.append(y)
        if best < INF:
            return int(best)
        radius[side] += 1
        front = (new, front[1]) if side == 0 else (front[0], new)
        side = 1 - side


def traces_to_json(traces, path=None) -> str:
    """Serialize traces as a JSON list of records."""
    text = json.dumps([t.to_dict() for t in traces], indent=1, default=int)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text
