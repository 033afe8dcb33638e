"""Dependency graphs and independent-cascade contagion.

An attack on node j is directly effective with probability z_j^o (set by j's
security configuration) and then spreads along directed edges: each edge
(j, j') fires at most once, with probability r_{j,j'}, and affected nodes
stay affected. Under these rules the per-node compromise probabilities are
exactly a live-edge computation: draw each edge independently, take
reachability from the source, and scale everything by z_j^o.

``cascade_exact`` enumerates all live-edge subsets of the edges reachable
from the source (bounded by a cap), ``cascade_mc`` samples them, and
``derive_utilities`` folds the resulting compromise profiles into the
utility tables of an :class:`~multidefender.game.InterdependentGame`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .game import InterdependentGame, _check_finite, _natural_key

EXACT_EDGE_CAP = 20


class CascadeSizeError(ValueError):
    """Too many reachable edges for exact enumeration."""


@dataclass(frozen=True)
class DependencyGraph:
    """Directed contagion graph with per-node values and direct-hit rates.

    Fields:
        nodes: node (target) identifiers.
        edges: directed (tail, head, rate) triples; rate is the probability
            the contagion crosses this edge once the tail is affected.
        direct: node -> config -> probability the node is directly affected
            when attacked under that config; the config order of a node is
            the insertion order of this mapping.
        values: defender -> node -> nonnegative loss if the node is
            affected; missing entries count as zero.
        owner: node -> controlling defender.
    """

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str, float], ...]
    direct: Mapping[str, Mapping[str, float]]
    values: Mapping[str, Mapping[str, float]]
    owner: Mapping[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("duplicate node names")
        known = set(self.nodes)
        seen = set()
        edges = []
        for a, b, r in self.edges:
            if a not in known or b not in known:
                raise ValueError(f"edge ({a}, {b}) has an unknown endpoint")
            if a == b:
                raise ValueError(f"self-loop on {a}")
            if (a, b) in seen:
                raise ValueError(f"duplicate edge ({a}, {b})")
            seen.add((a, b))
            r = _check_finite(r, f"rate[{a},{b}]")
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"rate[{a},{b}] outside [0, 1]: {r}")
            edges.append((a, b, r))
        object.__setattr__(self, "edges", tuple(edges))
        if set(self.direct) != known:
            raise ValueError("direct table must cover exactly the nodes")
        for j, row in self.direct.items():
            if not row:
                raise ValueError(f"node {j} needs at least one configuration")
            for o, z in row.items():
                z = _check_finite(z, f"direct[{j}][{o}]")
                if not 0.0 <= z <= 1.0:
                    raise ValueError(f"direct[{j}][{o}] outside [0, 1]: {z}")
        for i, row in self.values.items():
            for j, v in row.items():
                if j not in known:
                    raise ValueError(f"value for unknown node {j}")
                v = _check_finite(v, f"values[{i}][{j}]")
                if v < 0:
                    raise ValueError(f"values[{i}][{j}] must be nonnegative")
        if set(self.owner) != known:
            raise ValueError("owner map must cover exactly the nodes")

    def configs(self, node: str) -> tuple[str, ...]:
        return tuple(self.direct[node])

    def defenders(self) -> tuple[str, ...]:
        names = set(self.owner.values()) | set(self.values)
        return tuple(sorted(names, key=_natural_key))

    def value(self, defender: str, node: str) -> float:
        return float(self.values.get(defender, {}).get(node, 0.0))

    def reachable(self, source: str) -> tuple[str, ...]:
        """Nodes reachable from ``source`` when every edge is live."""
        if source not in set(self.nodes):
            raise ValueError(f"unknown node {source}")
        out: dict[str, list[str]] = {}
        for a, b, _ in self.edges:
            out.setdefault(a, []).append(b)
        seen = {source}
        frontier = [source]
        while frontier:
            nxt = []
            for a in frontier:
                for b in out.get(a, ()):
                    if b not in seen:
                        seen.add(b)
                        nxt.append(b)
            frontier = nxt
        return tuple(j for j in self.nodes if j in seen)

    def relevant_edges(self, source: str) -> tuple[tuple[str, str, float], ...]:
        """Edges whose tail the contagion can ever reach from ``source``."""
        live_from = set(self.reachable(source))
        return tuple(e for e in self.edges if e[0] in live_from)


@dataclass(frozen=True)
class CompromiseProfile:
    """Per-node probability of being affected by one attack.

    The entry at the attacked node equals the direct-hit probability z of
    its configuration; everything else is scaled by the same z.
    """

    source: str
    config: str
    p: Mapping[str, float]

    def __post_init__(self) -> None:
        clean = {}
        for j, q in self.p.items():
            q = _check_finite(q, f"compromise probability at {j}")
            if q < -1e-9 or q > 1.0 + 1e-9:
                raise ValueError(f"compromise probability at {j} outside [0, 1]: {q}")
            clean[j] = min(1.0, max(0.0, q))
        object.__setattr__(self, "p", clean)


def _z_of(g: DependencyGraph, source: str, config: str) -> float:
    try:
        return float(g.direct[source][config])
    except KeyError:
        raise ValueError(f"unknown node/config pair ({source}, {config})") from None


def _spread(rel, source, reach, live):
    """Reachability of each reach-node per live-edge draw.

    ``live`` is (draws, len(rel)) boolean; returns (draws, len(reach)).
    Fixpoint iteration over edges handles cycles; each pass only adds nodes.
    """
    at = {j: k for k, j in enumerate(reach)}
    aff = np.zeros((live.shape[0], len(reach)), dtype=bool)
    aff[:, at[source]] = True
    changed = True
    while changed:
        changed = False
        for e, (a, b, _) in enumerate(rel):
            new = aff[:, at[a]] & live[:, e] & ~aff[:, at[b]]
            if new.any():
                aff[:, at[b]] |= new
                changed = True
    return aff


def cascade_exact(g: DependencyGraph, source: str, config: str,
                  cap: int = EXACT_EDGE_CAP) -> CompromiseProfile:
    """Exact compromise profile by live-edge enumeration.

    Enumerates every subset of the edges reachable from ``source``; the
    number of such edges must not exceed ``cap``.
    """
    z = _z_of(g, source, config)
    if z == 0.0:
        return CompromiseProfile(source=source, config=config,
                                 p={j: 0.0 for j in g.nodes})
    rel = g.relevant_edges(source)
    if len(rel) > cap:
        raise CascadeSizeError(
            f"{len(rel)} edges reachable from {source} exceed the exact cap "
            f"{cap}; use cascade_mc")
    reach = g.reachable(source)
    k = len(rel)
    idx = np.arange(1 << k, dtype=np.uint32)
    live = np.empty((1 << k, k), dtype=bool)
    weight = np.ones(1 << k)
    for e, (_, _, r) in enumerate(rel):
        live[:, e] = (idx >> e) & 1
        weight *= np.where(live[:, e], r, 1.0 - r)
    aff = _spread(rel, source, reach, live)
    total = weight.sum()      # 1 up to rounding; normalizing keeps p[source] == z
    p = {j: 0.0 for j in g.nodes}
    for t, j in enumerate(reach):
        p[j] = z * float(weight[aff[:, t]].sum() / total)
    return CompromiseProfile(source=source, config=config, p=p)


def cascade_mc(g: DependencyGraph, source: str, config: str, samples: int,
               seed: int = 0) -> CompromiseProfile:
    """Monte Carlo compromise profile over ``samples`` live-edge draws.

    The generator is derived from (seed, source index, config index), so
    profiles for different attack cells are independent and reproducible
    regardless of evaluation order. The direct-hit factor z scales the
    estimate deterministically rather than being sampled.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    z = _z_of(g, source, config)
    if z == 0.0:
        return CompromiseProfile(source=source, config=config,
                                 p={j: 0.0 for j in g.nodes})
    rel = g.relevant_edges(source)
    reach = g.reachable(source)
    src_idx = g.nodes.index(source)
    cfg_idx = g.configs(source).index(config)
    rng = np.random.default_rng(np.random.SeedSequence([seed, src_idx, cfg_idx]))
    rates = np.array([r for _, _, r in rel])
    live = rng.random((samples, len(rel))) < rates
    aff = _spread(rel, source, reach, live)
    p = {j: 0.0 for j in g.nodes}
    for t, j in enumerate(reach):
        p[j] = z * float(aff[:, t].mean())
    p[source] = z
    return CompromiseProfile(source=source, config=config, p=p)


def compromise_profile(g: DependencyGraph, source: str, config: str,
                       method: str = "auto", cap: int = EXACT_EDGE_CAP,
                       samples: int = 100_000, seed: int = 0) -> CompromiseProfile:
    """Exact when the reachable edge set is small, Monte Carlo otherwise."""
    if method not in ("auto", "exact", "mc"):
        raise ValueError("method must be 'auto', 'exact' or 'mc'")
    if method == "exact":
        return cascade_exact(g, source, config, cap=cap)
    if method == "mc":
        return cascade_mc(g, source, config, samples, seed=seed)
    if len(g.relevant_edges(source)) <= cap:
        return cascade_exact(g, source, config, cap=cap)
    return cascade_mc(g, source, config, samples, seed=seed)


def derive_utilities(g: DependencyGraph, costs: Mapping[str, Mapping[str, float]],
                     attacker_values: Mapping[str, float] | None = None,
                     method: str = "auto", cap: int = EXACT_EDGE_CAP,
                     samples: int = 100_000, seed: int = 0,
                     profiles: Mapping[tuple[str, str], CompromiseProfile] | None = None,
                     ) -> InterdependentGame:
    """Fold cascade outcomes into a playable game.

    A defender's utility for an attack on (j, o) is minus the expected sum
    of its node values over the compromise profile; the attacker's value is
    the same expectation under ``attacker_values``, which defaults to the
    sum of all defenders' values per node (the attacker gains what the
    defenders collectively lose).

    Compromise profiles depend only on the graph, not on who owns what, so
    callers sweeping ownership structures over a fixed graph can compute
    them once and pass them in via ``profiles`` keyed by (node, config).
    """
    defenders = g.defenders()
    if attacker_values is None:
        attacker_values = {j: sum(g.value(i, j) for i in defenders)
                           for j in g.nodes}
    util: dict[str, dict[str, dict[str, float]]] = \
        {i: {j: {} for j in g.nodes} for i in defenders}
    atk: dict[str, dict[str, float]] = {j: {} for j in g.nodes}
    for j in g.nodes:
        for o in g.configs(j):
            if profiles is not None:
                prof = profiles[(j, o)]
            else:
                prof = compromise_profile(g, j, o, method=method, cap=cap,
                                          samples=samples, seed=seed)
            for i in defenders:
                util[i][j][o] = -sum(prof.p[t] * g.value(i, t) for t in g.nodes)
            atk[j][o] = sum(prof.p[t] * float(attacker_values.get(t, 0.0))
                            for t in g.nodes)
    return InterdependentGame(
        defenders=defenders, targets=g.nodes, owner=dict(g.owner),
        configs={j: g.configs(j) for j in g.nodes}, cost=costs,
        defender_util=util, attacker_val=atk)


# ---------------------------------------------------------------------------
# edge-list files: one "tail head rate" triple per line

def parse_edges(text: str) -> tuple[tuple[str, str, float], ...]:
    edges = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {ln}: expected 'tail head rate', got {raw!r}")
        a, b, r = parts
        edges.append((a, b, float(r)))
    return tuple(edges)


def format_edges(edges) -> str:
    return "".join(f"{a} {b} {r!r}\n" for a, b, r in edges)


def load_edges(path) -> tuple[tuple[str, str, float], ...]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_edges(fh.read())


def save_edges(path, edges) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_edges(edges))
