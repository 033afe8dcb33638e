"""Synthetic topologies, balanced min-cut partitioning and centrality.

Three generators cover the synthetic families used in the experiments: a
4-neighbor lattice, Erdos-Renyi draws, and preferential attachment. The
partitioner splits nodes into balanced parts while keeping the number of
edges crossing parts small: greedy region growing for the initial split,
then Kernighan-Lin style swap refinement. All randomness is seed-driven.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np


@dataclass(frozen=True)
class Topology:
    """Simple undirected graph on nodes 0..n-1 plus generator provenance."""

    n: int
    edges: tuple[tuple[int, int], ...]
    provenance: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("topology needs at least one node")
        canon = []
        for a, b in self.edges:
            a, b = int(a), int(b)
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise ValueError(f"edge ({a}, {b}) outside node range")
            if a == b:
                raise ValueError(f"self-loop on {a}")
            canon.append((min(a, b), max(a, b)))
        canon.sort()
        for e, f in zip(canon, canon[1:]):
            if e == f:
                raise ValueError(f"duplicate edge {e}")
        object.__setattr__(self, "edges", tuple(canon))
        object.__setattr__(self, "provenance", dict(self.provenance))

    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in self.edges:
            out[a].append(b)
            out[b].append(a)
        return tuple(tuple(sorted(nb)) for nb in out)

    def degrees(self) -> tuple[int, ...]:
        deg = [0] * self.n
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return tuple(deg)


@dataclass(frozen=True)
class Partition:
    """Balanced node-to-part assignment with its cut size."""

    assignment: tuple[int, ...]
    parts: int
    cut: int

    def __post_init__(self) -> None:
        sizes = [0] * self.parts
        for p in self.assignment:
            if not 0 <= p < self.parts:
                raise ValueError(f"part id {p} out of range")
            sizes[p] += 1
        if min(sizes) == 0:
            raise ValueError("every part must be nonempty")
        if max(sizes) - min(sizes) > 1:
            raise ValueError(f"unbalanced part sizes {sizes}")

    def members(self, part: int) -> tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.assignment) if p == part)


def cut_size(t: Topology, assignment) -> int:
    return sum(1 for a, b in t.edges if assignment[a] != assignment[b])


# ---------------------------------------------------------------------------
# generators

def grid(rows: int, cols: int) -> Topology:
    """4-neighbor lattice, nodes numbered row-major."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return Topology(rows * cols, tuple(edges),
                    {"kind": "grid", "rows": rows, "cols": cols})


def erdos_renyi(n: int, p_edge: float, seed: int = 0) -> Topology:
    """Each unordered pair appears independently with probability p_edge."""
    if not 0.0 <= p_edge <= 1.0:
        raise ValueError("p_edge must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    keep = rng.random(len(pairs)) < p_edge
    edges = tuple(e for e, k in zip(pairs, keep) if k)
    return Topology(n, edges, {"kind": "er", "n": n, "p": p_edge, "seed": seed})


def preferential_attachment(n: int, m_attach: int, seed: int = 0) -> Topology:
    """Degree-proportional growth from an (m+1)-clique core.

    Each arriving node attaches to m_attach distinct existing nodes chosen
    proportionally to current degree (redrawing duplicates), so early nodes
    accumulate heavy-tailed degrees.
    """
    if m_attach < 1:
        raise ValueError("m_attach must be >= 1")
    if n < m_attach + 1:
        raise ValueError("n must exceed m_attach")
    rng = np.random.default_rng(seed)
    core = m_attach + 1
    edges = [(a, b) for a in range(core) for b in range(a + 1, core)]
    deg = np.zeros(n)
    deg[:core] = core - 1
    for v in range(core, n):
        chosen: list[int] = []
        while len(chosen) < m_attach:
            w = deg[:v].copy()
            w[chosen] = 0.0
            u = int(rng.choice(v, p=w / w.sum()))
            chosen.append(u)
        for u in chosen:
            edges.append((u, v))
            deg[u] += 1
        deg[v] = m_attach
    return Topology(n, tuple(edges),
                    {"kind": "ba", "n": n, "m": m_attach, "seed": seed})


# ---------------------------------------------------------------------------
# partitioning

def _grow_regions(t: Topology, sizes: list[int]) -> list[int]:
    """Greedy compact region growing.

    Each part starts at the lowest-degree unassigned node and repeatedly
    absorbs the candidate with the most neighbors already inside, breaking
    ties toward nodes discovered earlier. Low-degree seeds sit on the
    boundary of what is left, which keeps regions block-shaped on lattices.
    """
    adj = t.adjacency()
    deg = t.degrees()
    assign = [-1] * t.n
    for part, want in enumerate(sizes):
        left = [v for v in range(t.n) if assign[v] == -1]
        seed = min(left, key=lambda v: (deg[v], v))
        assign[seed] = part
        layer = {seed: 0}
        grown = 1
        while grown < want:
            cand: dict[int, int] = {}
            for v, l in layer.items():
                for u in adj[v]:
                    if assign[u] == -1 and (u not in cand or cand[u] > l + 1):
                        cand[u] = l + 1
            if not cand:
                # disconnected remainder: restart from a fresh low-degree seed
                left = [v for v in range(t.n) if assign[v] == -1]
                nxt = min(left, key=lambda v: (deg[v], v))
                assign[nxt] = part
                layer[nxt] = 0
                grown += 1
                continue
            best = min(cand,
                       key=lambda u: (-sum(1 for w in adj[u] if assign[w] == part),
                                      cand[u], u))
            assign[best] = part
            layer[best] = cand[best]
            grown += 1
    return assign


def _kl_refine(t: Topology, assign: list[int], max_passes: int = 8) -> list[int]:
    """Kernighan-Lin pairwise swap refinement between every pair of parts.

    A pass over a part pair tentatively swaps the best boundary pair even
    when the immediate gain is negative, then commits the prefix of swaps
    with the best cumulative gain. Sizes never change.
    """
    adj = t.adjacency()
    parts = max(assign) + 1

    def gain(v, other):
        # cut reduction if v moves to `other`
        g = 0
        for u in adj[v]:
            if assign[u] == assign[v]:
                g -= 1
            elif assign[u] == other:
                g += 1
        return g

    improved = True
    passes = 0
    while improved and passes < max_passes:
        improved = False
        passes += 1
        for pa in range(parts):
            for pb in range(pa + 1, parts):
                trail: list[tuple[int, int, int]] = []
                frozen: set[int] = set()
                total = 0
                while True:
                    best = None
                    for v in range(t.n):
                        if v in frozen or assign[v] != pa:
                            continue
                        for u in range(t.n):
                            if u in frozen or assign[u] != pb:
                                continue
                            # the (v, u) edge stays cut after a swap, so it
                            # must not count as a gain on either side
                            g = gain(v, pb) + gain(u, pa) \
                                - (2 if u in adj[v] else 0)
                            if best is None or g > best[0]:
                                best = (g, v, u)
                    if best is None:
                        break
                    g, v, u = best
                    assign[v], assign[u] = pb, pa
                    frozen.update((v, u))
                    total += g
                    trail.append((g, v, u))
                    if len(trail) >= 2 * t.n:
                        break
                # keep the best prefix, undo the rest
                run = 0
                peak, peak_at = 0, -1
                for idx, (g, _, _) in enumerate(trail):
                    run += g
                    if run > peak:
                        peak, peak_at = run, idx
                for g, v, u in reversed(trail[peak_at + 1:]):
                    assign[v], assign[u] = pa, pb
                if peak > 0:
                    improved = True
    return assign


def partition(t: Topology, parts: int) -> Partition:
    """Balanced low-cut split of the nodes into ``parts`` groups."""
    if parts < 1:
        raise ValueError("parts must be >= 1")
    if parts > t.n:
        raise ValueError(f"cannot split {t.n} nodes into {parts} nonempty parts")
    base, extra = divmod(t.n, parts)
    sizes = [base + (1 if k < extra else 0) for k in range(parts)]
    if parts == 1:
        assign = [0] * t.n
    elif parts == t.n:
        assign = list(range(t.n))
    else:
        assign = _kl_refine(t, _grow_regions(t, sizes))
    return Partition(tuple(assign), parts, cut_size(t, assign))


# ---------------------------------------------------------------------------
# centrality

def closeness(t: Topology) -> tuple[float, ...]:
    """Harmonic closeness, normalized by n-1; zero for isolated nodes.

    The harmonic form stays finite on disconnected graphs: unreachable
    pairs simply contribute nothing.
    """
    adj = t.adjacency()
    if t.n == 1:
        return (0.0,)
    out = []
    for s in range(t.n):
        dist = {s: 0}
        frontier = [s]
        d = 0
        while frontier:
            d += 1
            nxt = []
            for v in frontier:
                for u in adj[v]:
                    if u not in dist:
                        dist[u] = d
                        nxt.append(u)
            frontier = nxt
        out.append(sum(1.0 / d for v, d in dist.items() if v != s) / (t.n - 1))
    return tuple(out)


# ---------------------------------------------------------------------------
# files: "#" provenance header, then "a b" per line; partitions as "node part"

def save_topology(path, t: Topology) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nodes {t.n}\n")
        if t.provenance:
            fh.write(f"# provenance {json.dumps(t.provenance, sort_keys=True)}\n")
        for a, b in t.edges:
            fh.write(f"{a} {b}\n")


def load_topology(path) -> Topology:
    n = None
    provenance: dict = {}
    edges = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("nodes "):
                    n = int(body.split()[1])
                elif body.startswith("provenance "):
                    provenance = json.loads(body[len("provenance "):])
                continue
            if not line:
                continue
            a, b = line.split()
            edges.append((int(a), int(b)))
    if n is None:
        n = 1 + max((max(e) for e in edges), default=0)
    return Topology(n, tuple(edges), provenance)


def save_partition(path, p: Partition) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node, part in enumerate(p.assignment):
            fh.write(f"{node} {part}\n")


def load_partition(path, t: Topology | None = None) -> Partition:
    """Read a "node part" file; an escape hatch for externally computed splits."""
    pairs = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            node, part = line.split()
            pairs[int(node)] = int(part)
    if set(pairs) != set(range(len(pairs))):
        raise ValueError("partition file must cover nodes 0..n-1")
    assign = tuple(pairs[i] for i in range(len(pairs)))
    parts = max(assign) + 1
    cut = cut_size(t, assign) if t is not None else 0
    return Partition(assign, parts, cut)
