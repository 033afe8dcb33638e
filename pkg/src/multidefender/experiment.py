"""Decentralization sweep driver.

One experiment crosses a topology family with a list of player counts and
contagion probabilities, replicated over seeded samples. Each cell builds a
game (topology -> node values -> ownership partition -> cascade-derived
utilities), approximates an equilibrium with restarted best-response
dynamics, and emits one CSV row. The social optimum reference for a cell is
the merged single-defender instance of the same (sample, p) pair; with one
defender a single best response is exact, so that column carries no search
error of its own.

Determinism contract: (config, master seed) fixes every byte of the output.
Per-cell randomness is drawn from ``SeedSequence([master, sample, stream,
...])`` so cells are independent of execution order and worker count.
Completed cells persist under ``trace/`` keyed by a hash of their
parameters; rerunning with the same output directory skips them.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import netgen
from .cascade import CompromiseProfile, DependencyGraph, compromise_profile, derive_utilities
from .game import InterdependentGame
from .netgen import Topology
from .search import SearchConfig, run_search

log = logging.getLogger(__name__)

TOPOLOGY_KINDS = ("grid", "er", "ba", "file")

# required generator parameters per topology kind
_TOPOLOGY_PARAMS = {
    "grid": ("rows", "cols"),
    "er": ("n", "p_edge"),
    "ba": ("n", "m_attach"),
    "file": ("path",),
}


def _node_count(spec: Mapping[str, object]) -> int | None:
    """Node count if it is knowable without generating, else None."""
    kind = spec["kind"]
    if kind == "grid":
        return int(spec["rows"]) * int(spec["cols"])
    if kind in ("er", "ba"):
        return int(spec["n"])
    return None


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep description.

    ``topology`` is a generator spec ({"kind": "grid", "rows": 4, "cols": 4},
    {"kind": "er", "n": 16, "p_edge": 0.2}, {"kind": "ba", "n": 16,
    "m_attach": 2}) or {"kind": "file", "path": ...}. Every undirected
    topology edge becomes two directed contagion edges with rate p. Node
    values are uniform on [0, 1], redrawn per sample; defense cost is
    ``cost`` per node for the protective configuration. ``search`` holds
    keyword overrides for :class:`SearchConfig` (the per-cell seed is always
    injected).
    """

    topology: Mapping[str, object]
    players: tuple[int, ...] = (1, 2, 4, 8, 16)
    p_values: tuple[float, ...] = (0.1, 0.7)
    cost: float = 0.2
    samples: int = 40
    search: Mapping[str, object] = field(default_factory=dict)
    # A round of best-response dynamics costs 2k solves for k defenders, so
    # budgets scale with the player count to give every cell a comparable
    # number of rounds. An explicit "iterations" in ``search`` overrides
    # this with a flat per-cell budget.
    iters_per_defender: int = 300
    mc_samples: int = 10_000        # live-edge draws when exact enumeration is off the table

    def __post_init__(self) -> None:
        spec = dict(self.topology)
        kind = spec.get("kind")
        if kind not in TOPOLOGY_KINDS:
            raise ValueError(f"topology kind must be one of {TOPOLOGY_KINDS}, got {kind!r}")
        missing = [k for k in _TOPOLOGY_PARAMS[kind] if k not in spec]
        if missing:
            raise ValueError(f"topology spec for {kind!r} is missing {missing}")
        object.__setattr__(self, "topology", spec)
        players = tuple(int(k) for k in self.players)
        if not players or any(k < 1 for k in players):
            raise ValueError("players must be a nonempty list of positive counts")
        if len(set(players)) != len(players):
            raise ValueError("duplicate player counts")
        n = _node_count(spec)
        if n is not None and max(players) > n:
            raise ValueError(f"player count {max(players)} exceeds {n} nodes")
        object.__setattr__(self, "players", players)
        ps = tuple(float(p) for p in self.p_values)
        if not ps or any(not 0.0 <= p <= 1.0 for p in ps):
            raise ValueError("p_values must be probabilities in [0, 1]")
        if len(set(ps)) != len(ps):
            raise ValueError("duplicate p values")
        object.__setattr__(self, "p_values", ps)
        if not np.isfinite(self.cost) or self.cost < 0:
            raise ValueError("cost must be finite and nonnegative")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.iters_per_defender < 1:
            raise ValueError("iters_per_defender must be >= 1")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")
        search = dict(self.search)
        SearchConfig(**{**search, "seed": 0})   # reject bad keys or values up front
        object.__setattr__(self, "search", search)

    def to_dict(self) -> dict:
        return {
            "topology": dict(self.topology),
            "players": list(self.players),
            "p_values": list(self.p_values),
            "cost": self.cost,
            "samples": self.samples,
            "search": dict(self.search),
            "iters_per_defender": self.iters_per_defender,
            "mc_samples": self.mc_samples,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, object]) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**dict(d))

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n",
                              encoding="utf-8")


def desk_config(**overrides) -> ExperimentConfig:
    """16-node sweep sized for a workstation (tens of minutes serially)."""
    base: dict = dict(
        topology={"kind": "grid", "rows": 4, "cols": 4},
        players=(1, 2, 4, 8, 16),
        p_values=(0.1, 0.7),
        cost=0.2,
        samples=10,
        search={"algorithm": "ribr", "restart_budget": 2},
        iters_per_defender=300,
        mc_samples=10_000,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def full_config(**overrides) -> ExperimentConfig:
    """64-node, 40-sample preset; hours of solver work, not a test fixture."""
    base: dict = dict(
        topology={"kind": "grid", "rows": 8, "cols": 8},
        players=(1, 2, 4, 8, 16, 32, 64),
        p_values=(0.1, 0.4, 0.7),
        cost=0.2,
        samples=40,
        search={"algorithm": "ribr", "restart_budget": 4},
        iters_per_defender=1000,
        mc_samples=100_000,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@dataclass(frozen=True)
class ExperimentRow:
    """One cell of the sweep, plus the shared optimum reference columns."""

    topology: str
    sample: int
    seed: int                   # per-cell search seed (derived from the master seed)
    players: int
    p: float
    welfare_eq: float
    welfare_opt: float
    welfare_eq_per_player: float
    welfare_opt_per_player: float
    avg_coverage: float
    epsilon: float
    runtime: int                # best-response solves consumed, not wall time


RESULTS_COLUMNS = tuple(f.name for f in dataclasses.fields(ExperimentRow))
CENTRALITY_COLUMNS = ("sample", "players", "p", "node", "closeness", "coverage")


# ---------------------------------------------------------------------------
# seed fan-out
#
# Stream tags: 0 = topology generation, 1 = node values, 2 = cascade
# sampling, 3 = search. Each cell seed is the first uint64 of
# SeedSequence([master, sample, stream, ...extras]).

def _substream(master: int, *key: int) -> int:
    # the length word keeps zero-extended keys distinct (SeedSequence pads
    # short entropy with zeros, so [a, b] and [a, b, 0] would otherwise agree)
    ss = np.random.SeedSequence([int(master), len(key)] + [int(k) for k in key])
    return int(ss.generate_state(1, np.uint64)[0])


def build_topology(spec: Mapping[str, object], seed: int) -> Topology:
    """Instantiate a generator spec; the seed matters only for er and ba."""
    kind = spec["kind"]
    if kind == "grid":
        return netgen.grid(int(spec["rows"]), int(spec["cols"]))
    if kind == "er":
        return netgen.erdos_renyi(int(spec["n"]), float(spec["p_edge"]), seed)
    if kind == "ba":
        return netgen.preferential_attachment(int(spec["n"]), int(spec["m_attach"]), seed)
    return netgen.load_topology(spec["path"])


def _node_name(i: int) -> str:
    return f"n{i}"


def dependency_graph(t: Topology, values: Sequence[float], p: float,
                     assignment: Sequence[int]) -> DependencyGraph:
    """Contagion graph for one cell: both directions of every topology edge
    carry rate p, covering a node blocks the direct hit entirely, and each
    defender values exactly the nodes it owns."""
    nodes = tuple(_node_name(i) for i in range(t.n))
    edges = []
    for a, b in t.edges:
        edges.append((_node_name(a), _node_name(b), float(p)))
        edges.append((_node_name(b), _node_name(a), float(p)))
    direct = {j: {"cover": 0.0, "pass": 1.0} for j in nodes}
    owner = {_node_name(i): f"d{assignment[i]}" for i in range(t.n)}
    vals: dict[str, dict[str, float]] = {}
    for i in range(t.n):
        vals.setdefault(owner[_node_name(i)], {})[_node_name(i)] = float(values[i])
    return DependencyGraph(nodes=nodes, edges=tuple(edges), direct=direct,
                           values=vals, owner=owner)


def _cell_profiles(g: DependencyGraph, mc_samples: int, seed: int,
                   ) -> dict[tuple[str, str], CompromiseProfile]:
    out = {}
    for j in g.nodes:
        for o in g.configs(j):
            out[(j, o)] = compromise_profile(g, j, o, method="auto",
                                             samples=mc_samples, seed=seed)
    return out


def _search_config(cfg: ExperimentConfig, seed: int, players: int) -> SearchConfig:
    kw = dict(cfg.search)
    kw["seed"] = seed
    kw.setdefault("iterations", cfg.iters_per_defender * players)
    if players == 1:
        # A lone defender's best response is globally optimal, so plain
        # best-response dynamics converge in one round, exactly.
        kw["algorithm"] = "ibr"
    return SearchConfig(**kw)


def _cell_game(cfg: ExperimentConfig, topo: Topology, values: Sequence[float],
               players: int, p: float,
               profiles: Mapping[tuple[str, str], CompromiseProfile],
               ) -> InterdependentGame:
    part = netgen.partition(topo, players)
    g = dependency_graph(topo, values, p, part.assignment)
    costs = {j: {"cover": float(cfg.cost), "pass": 0.0} for j in g.nodes}
    return derive_utilities(g, costs, profiles=profiles)


def _run_cell(cfg: ExperimentConfig, master: int, sample: int, p_idx: int,
              players: int, topo: Topology, values: tuple[float, ...],
              profiles: Mapping[tuple[str, str], CompromiseProfile] | None,
              ) -> dict:
    """Execute one cell; returns a plain-JSON payload."""
    p = cfg.p_values[p_idx]
    computed_here = profiles is None
    if profiles is None:
        g0 = dependency_graph(topo, values, p, [0] * topo.n)
        profiles = _cell_profiles(g0, cfg.mc_samples,
                                  _substream(master, sample, 2, p_idx))
    game = _cell_game(cfg, topo, values, players, p, profiles)
    seed = _substream(master, sample, 3, p_idx, players)
    trace = run_search(game, _search_config(cfg, seed, players))
    rep = trace.report
    coverage = [rep.profile.q(game, j, "cover") for j in game.targets]
    payload = {
        "search_seed": seed,
        "welfare_eq": float(rep.welfare),
        "epsilon": float(rep.epsilon),
        "avg_coverage": float(np.mean(coverage)),
        "runtime": int(trace.solves_total),
        "coverage": [float(q) for q in coverage],
    }
    if computed_here:
        # shipped back so dependent cells reuse them; zero entries dropped
        payload["profiles"] = {
            f"{j} {o}": {t: pr.p[t] for t in pr.p if pr.p[t] != 0.0}
            for (j, o), pr in profiles.items()}
    return payload


def _cell_id(cfg: ExperimentConfig, master: int, sample: int, p_idx: int,
             players: int) -> str:
    payload = {
        "topology": dict(cfg.topology),
        "cost": cfg.cost,
        "search": dict(cfg.search),
        "iters_per_defender": cfg.iters_per_defender,
        "mc_samples": cfg.mc_samples,
        "master": int(master),
        "sample": sample,
        "p": cfg.p_values[p_idx],
        "players": players,
    }
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# driver


def _worker(args):
    key, cfg, master, sample, p_idx, players, topo, values, profiles = args
    try:
        return key, _run_cell(cfg, master, sample, p_idx, players, topo,
                              values, profiles), None
    except Exception as exc:          # noqa: BLE001 - cell isolation by contract
        return key, None, f"{type(exc).__name__}: {exc}"


def _execute(tasks, workers: int):
    """Run cell tasks, yielding (key, payload, error) as they finish."""
    if workers <= 1 or len(tasks) <= 1:
        for args in tasks:
            yield _worker(args)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        pending = {pool.submit(_worker, args) for args in tasks}
        while pending:
            done, pending = wait(pending, return_when=FIRST_COMPLETED)
            for fut in done:
                yield fut.result()


def run_experiment(cfg: ExperimentConfig, seed: int = 0,
                   out: str | Path | None = None, workers: int = 1,
                   ) -> tuple[ExperimentRow, ...]:
    """Run the sweep and return one row per cell, iterated sample-major
    (then p, then players, each in config order).

    With ``out`` set, also writes ``results.csv``, ``centrality.csv`` and a
    ``trace/`` directory with one JSON file per completed cell; cells whose
    trace file already exists are not recomputed.
    """
    trace_dir = None
    if out is not None:
        trace_dir = Path(out) / "trace"
        trace_dir.mkdir(parents=True, exist_ok=True)

    samples = range(cfg.samples)
    topos: dict[int, Topology] = {}
    values: dict[int, tuple[float, ...]] = {}
    for s in samples:
        topos[s] = build_topology(cfg.topology, _substream(seed, s, 0))
        if max(cfg.players) > topos[s].n:
            raise ValueError(f"player count {max(cfg.players)} exceeds "
                             f"{topos[s].n} nodes in the generated topology")
        rng = np.random.default_rng(_substream(seed, s, 1))
        values[s] = tuple(float(v) for v in rng.random(topos[s].n))

    def cached(key: str) -> dict | None:
        if trace_dir is None:
            return None
        f = trace_dir / f"{key}.json"
        if not f.exists():
            return None
        with open(f, encoding="utf-8") as fh:
            return json.load(fh)

    def persist(key: str, payload: dict) -> None:
        if trace_dir is not None:
            with open(trace_dir / f"{key}.json", "w", encoding="utf-8") as fh:
                json.dump(payload, fh)

    # Phase 1: merged single-defender reference cells, one per (sample, p).
    # These also compute the compromise profiles reused by phase 2.
    results: dict[tuple[int, int, int], dict] = {}
    profile_bank: dict[tuple[int, int], dict[tuple[str, str], CompromiseProfile]] = {}
    tasks = []
    for s in samples:
        for pi in range(len(cfg.p_values)):
            key = _cell_id(cfg, seed, s, pi, 1)
            payload = cached(key)
            if payload is not None:
                results[(s, pi, 1)] = payload
            else:
                tasks.append(((s, pi, 1), cfg, seed, s, pi, 1, topos[s],
                              values[s], None))
    done = 0
    for key, payload, err in _execute(tasks, workers):
        done += 1
        if err is not None:
            log.warning("cell sample=%d p=%g players=1 failed: %s",
                        key[0], cfg.p_values[key[1]], err)
            continue
        results[key] = payload
        persist(_cell_id(cfg, seed, key[0], key[1], 1), payload)
        log.info("merged cell %d/%d done", done, len(tasks))
    for (s, pi, _), payload in results.items():
        bank = {}
        for label, row in payload["profiles"].items():
            j, o = label.split(" ")
            p = {t: 0.0 for t in (_node_name(i) for i in range(topos[s].n))}
            p.update({t: float(x) for t, x in row.items()})
            bank[(j, o)] = CompromiseProfile(source=j, config=o, p=p)
        profile_bank[(s, pi)] = bank

    # Phase 2: the decentralized cells.
    tasks = []
    for s in samples:
        for pi in range(len(cfg.p_values)):
            for k in cfg.players:
                if k == 1:
                    continue
                key = _cell_id(cfg, seed, s, pi, k)
                payload = cached(key)
                if payload is not None:
                    results[(s, pi, k)] = payload
                    continue
                if (s, pi) not in profile_bank:
                    log.warning("skipping sample=%d p=%g players=%d: merged "
                                "reference cell failed", s, cfg.p_values[pi], k)
                    continue
                tasks.append(((s, pi, k), cfg, seed, s, pi, k, topos[s],
                              values[s], profile_bank[(s, pi)]))
    done = 0
    for key, payload, err in _execute(tasks, workers):
        done += 1
        if err is not None:
            log.warning("cell sample=%d p=%g players=%d failed: %s",
                        key[0], cfg.p_values[key[1]], key[2], err)
            continue
        results[key] = payload
        persist(_cell_id(cfg, seed, key[0], key[1], key[2]), payload)
        log.info("cell %d/%d done", done, len(tasks))

    kind = str(cfg.topology["kind"])
    rows = []
    cent_rows = []
    for s in samples:
        for pi, p in enumerate(cfg.p_values):
            opt = results.get((s, pi, 1))
            for k in cfg.players:
                payload = results.get((s, pi, k))
                if payload is None or opt is None:
                    continue
                rows.append(ExperimentRow(
                    topology=kind, sample=s, seed=payload["search_seed"],
                    players=k, p=p,
                    welfare_eq=payload["welfare_eq"],
                    welfare_opt=opt["welfare_eq"],
                    welfare_eq_per_player=payload["welfare_eq"] / k,
                    welfare_opt_per_player=opt["welfare_eq"] / k,
                    avg_coverage=payload["avg_coverage"],
                    epsilon=payload["epsilon"],
                    runtime=payload["runtime"]))
                closeness = netgen.closeness(topos[s])
                for i in range(topos[s].n):
                    cent_rows.append((s, k, p, i, closeness[i],
                                      payload["coverage"][i]))

    row_tuple = tuple(rows)
    if out is not None:
        write_results(row_tuple, Path(out) / "results.csv")
        write_centrality(cent_rows, Path(out) / "centrality.csv")
    return row_tuple


# ---------------------------------------------------------------------------
# CSV emission


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def results_csv(rows: Sequence[ExperimentRow]) -> str:
    lines = [
        "# decentralization sweep results; one row per (sample, p, players) cell",
        "# welfare_opt: welfare of the merged single-defender instance (its lone",
        "#   best response is exact); runtime counts best-response solves",
        ",".join(RESULTS_COLUMNS),
    ]
    for r in rows:
        lines.append(",".join(_fmt(getattr(r, c)) for c in RESULTS_COLUMNS))
    return "\n".join(lines) + "\n"


def write_results(rows: Sequence[ExperimentRow], path: str | Path) -> None:
    Path(path).write_text(results_csv(rows), encoding="utf-8")


def centrality_csv(rows: Sequence[tuple]) -> str:
    lines = ["# harmonic closeness vs equilibrium coverage, per node and cell",
             ",".join(CENTRALITY_COLUMNS)]
    for r in rows:
        lines.append(",".join(_fmt(x) for x in r))
    return "\n".join(lines) + "\n"


def write_centrality(rows: Sequence[tuple], path: str | Path) -> None:
    Path(path).write_text(centrality_csv(rows), encoding="utf-8")


def centrality_report(t: Topology, coverage: Sequence[float],
                      ) -> tuple[tuple[float, float], ...]:
    """Pair each node's harmonic closeness with its coverage probability."""
    cov = [float(q) for q in coverage]
    if len(cov) != t.n:
        raise ValueError(f"coverage has {len(cov)} entries for {t.n} nodes")
    cl = netgen.closeness(t)
    return tuple((cl[i], cov[i]) for i in range(t.n))
