"""Approximate equilibrium search over coverage profiles.

Four algorithms share a budget measured in best-response solves: evaluating
the regret of one profile costs one solve per defender, and one iterated
best-response move costs one solve. An evaluation that starts inside the
budget runs to completion, so a search may overshoot by less than one
evaluation; the trace records the exact count.

Random search (rs) scores independently sampled profiles and keeps the
argmin. Simulated annealing (sa) perturbs one target's config distribution
at a time and accepts worsening moves with probability exp(-delta/T) under
geometric cooling; the initial temperature comes from probe moves unless
pinned. Iterated best response (ibr) cycles defenders in id order and stops
at a fixed point, below the regret tolerance, or at the budget. ribr restarts
ibr from the two cost corners (nobody defending, everybody defending at the
priciest config) and then from random profiles, merging by lowest regret
with earliest-restart tie breaking; restarts can run in a process pool and
are re-accounted afterwards so the result is identical to a sequential run.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import milp
from .game import (CoverageProfile, EquilibriumReport, InterdependentGame,
                   ase_attack, defender_utilities, evaluate_profile, regret)

ALGORITHMS = ("rs", "sa", "ibr", "ribr")
_GAIN_EPS = 1e-9        # smallest best-response gain worth moving for


class SearchResourceError(RuntimeError):
    """A best-response solve gave out; carries the partial trace."""

    def __init__(self, message: str, trace: "SearchTrace | None" = None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SearchConfig:
    algorithm: str = "ribr"
    iterations: int = 1000          # budget in best-response solves
    seed: int = 0
    tol: float = 1e-6
    restart_budget: int = 16        # max ribr restarts; budget usually binds first
    sa_step: float = 0.2            # largest mass moved per perturbation
    sa_probes: int = 32             # probe moves used to set T0
    sa_t0: float | None = None      # pin the initial temperature (0 = descent)
    sa_gamma: float | None = None   # pin the cooling factor
    sa_final_frac: float = 1e-4     # derived gamma targets T_end = frac * T0
    workers: int = 1                # process pool size for ribr restarts
    br_options: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.restart_budget < 1:
            raise ValueError("restart_budget must be >= 1")
        if not 0.0 < self.sa_step <= 1.0:
            raise ValueError("sa_step must lie in (0, 1]")
        if self.sa_probes < 1:
            raise ValueError("sa_probes must be >= 1")
        if self.sa_t0 is not None and self.sa_t0 < 0:
            raise ValueError("sa_t0 must be nonnegative")
        if self.sa_gamma is not None and not 0.0 < self.sa_gamma <= 1.0:
            raise ValueError("sa_gamma must lie in (0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class SearchTrace:
    """Evaluation-by-evaluation record of one search run.

    values holds the raw regret of each evaluated profile, regrets the
    running best (nonincreasing by construction), solves the cumulative
    solve count after each evaluation. restarts marks the event index
    where each restart begins. report describes the best profile found.
    """

    algorithm: str
    values: tuple[float, ...]
    regrets: tuple[float, ...]
    solves: tuple[int, ...]
    labels: tuple[str, ...]
    profiles: tuple[CoverageProfile, ...]
    report: EquilibriumReport
    restarts: tuple[int, ...] = (0,)
    solves_total: int = 0


def corner_profile(game: InterdependentGame, which: str) -> CoverageProfile:
    """Pure profile at the cheapest ("idle") or priciest ("full") configs."""
    if which not in ("idle", "full"):
        raise ValueError("which must be 'idle' or 'full'")
    sign = 1.0 if which == "idle" else -1.0
    choice = {}
    for j in game.targets:
        ranked = sorted(game.configs[j], key=lambda o: (sign * game.cost[j][o],
                                                        game.configs[j].index(o)))
        choice[j] = ranked[0]
    return CoverageProfile.pure(game, choice)


def sample_profile(game: InterdependentGame, rng: np.random.Generator) -> CoverageProfile:
    """Uniform draw: each target's config distribution from a flat simplex."""
    rows = {}
    for j in game.targets:
        k = len(game.configs[j])
        rows[j] = tuple(float(p) for p in rng.dirichlet(np.ones(k)))
    return CoverageProfile(rows)


def perturb_profile(game: InterdependentGame, profile: CoverageProfile,
                    rng: np.random.Generator, step: float) -> CoverageProfile:
    """Move up to ``step`` mass between two configs of one random target."""
    movable = [j for j in game.targets if len(game.configs[j]) >= 2]
    if not movable:
        return profile
    j = movable[int(rng.integers(len(movable)))]
    k = len(game.configs[j])
    src, dst = (int(i) for i in rng.choice(k, size=2, replace=False))
    amount = min(float(rng.uniform(0.0, step)), profile.dist[j][src])
    row = list(profile.dist[j])
    row[src] -= amount
    row[dst] += amount
    return profile.replace(j, tuple(row))


class _Recorder:
    """Accumulates evaluation events and the running best profile."""

    def __init__(self, algorithm: str):
        self.algorithm = algorithm
        self.values: list[float] = []
        self.regrets: list[float] = []
        self.solves: list[int] = []
        self.labels: list[str] = []
        self.profiles: list[CoverageProfile] = []
        self.restarts: list[int] = []
        self.best = math.inf
        self.best_profile: CoverageProfile | None = None

    def mark_restart(self):
        self.restarts.append(len(self.values))

    def add(self, label: str, profile: CoverageProfile, value: float, solves: int):
        self.values.append(float(value))
        if value < self.best:
            self.best = float(value)
            self.best_profile = profile
        self.regrets.append(self.best)
        self.solves.append(int(solves))
        self.labels.append(label)
        self.profiles.append(profile)

    def trace(self, game: InterdependentGame, delta: float, total: int) -> SearchTrace:
        if self.best_profile is None:
            raise RuntimeError("search recorded no evaluations")
        report = evaluate_profile(game, self.best_profile, tol=delta, epsilon=self.best)
        return SearchTrace(algorithm=self.algorithm, values=tuple(self.values),
                           regrets=tuple(self.regrets), solves=tuple(self.solves),
                           labels=tuple(self.labels), profiles=tuple(self.profiles),
                           report=report, restarts=tuple(self.restarts) or (0,),
                           solves_total=int(total))


def _resolved_delta(game: InterdependentGame, cfg: SearchConfig) -> float:
    opts = cfg.br_options
    return milp.resolve_stability(game, opts.get("delta"), opts.get("m_big"))[0]


def _soft_br_options(cfg: SearchConfig) -> dict:
    """Search runs downgrade the re-simulation cross-check to a warning so a
    knife-edge profile cannot abort a whole run; callers may override."""
    return {"check": "warn", **cfg.br_options}


def random_search(game: InterdependentGame, cfg: SearchConfig) -> SearchTrace:
    """Score uniformly sampled profiles by regret; keep the first argmin."""
    n = len(game.defenders)
    delta = _resolved_delta(game, cfg)
    opts = _soft_br_options(cfg)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    rec = _Recorder("rs")
    rec.mark_restart()
    consumed = 0
    while consumed < cfg.iterations:
        prof = sample_profile(game, rng)
        r = regret(game, prof, **opts)
        consumed += n
        rec.add("sample", prof, r, consumed)
    return rec.trace(game, delta, consumed)


def simulated_annealing(game: InterdependentGame, cfg: SearchConfig) -> SearchTrace:
    """Annealed local search under geometric cooling."""
    n = len(game.defenders)
    delta = _resolved_delta(game, cfg)
    opts = _soft_br_options(cfg)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    rec = _Recorder("sa")
    rec.mark_restart()
    consumed = 0

    prof = sample_profile(game, rng)
    cur = regret(game, prof, **opts)
    consumed += n
    rec.add("init", prof, cur, consumed)

    deltas = []
    while len(deltas) < cfg.sa_probes and consumed < cfg.iterations:
        cand = perturb_profile(game, prof, rng, cfg.sa_step)
        rc = regret(game, cand, **opts)
        consumed += n
        rec.add("probe", cand, rc, consumed)
        deltas.append(abs(rc - cur))
    t0 = cfg.sa_t0 if cfg.sa_t0 is not None else float(np.median(deltas)) if deltas else 0.0

    steps_left = max(1, (cfg.iterations - consumed) // n)
    gamma = cfg.sa_gamma if cfg.sa_gamma is not None \
        else cfg.sa_final_frac ** (1.0 / steps_left)
    step_idx = 0
    while consumed < cfg.iterations:
        cand = perturb_profile(game, prof, rng, cfg.sa_step)
        rc = regret(game, cand, **opts)
        consumed += n
        diff = rc - cur
        temp = t0 * gamma ** step_idx
        step_idx += 1
        accept = diff <= 0 or (temp > 0 and rng.random() < math.exp(-diff / temp))
        if accept:
            prof, cur = cand, rc
        rec.add("accept" if accept else "reject", cand, rc, consumed)
    return rec.trace(game, delta, consumed)


# ---------------------------------------------------------------------------
# Best-response dynamics. The core returns an op-cost list alongside the
# events so a run executed speculatively with a generous budget can be
# re-accounted under the budget it would have had in a sequential schedule.

@dataclass(frozen=True)
class _IbrCore:
    ops: tuple[int, ...]                 # solve cost of each operation in order
    events: tuple[tuple[int, str, CoverageProfile, float], ...]  # (op idx, ...)
    converged: bool
    failed: str | None = None            # resource exhaustion mid-run


def _ibr_core(game: InterdependentGame, start: CoverageProfile, cap: int,
              tol: float, delta: float, br_options: Mapping) -> _IbrCore:
    n = len(game.defenders)
    ops: list[int] = []
    events: list[tuple[int, str, CoverageProfile, float]] = []
    consumed = 0

    def done(converged, failed=None):
        return _IbrCore(tuple(ops), tuple(events), converged, failed)

    def evaluate(prof, label):
        nonlocal consumed
        r = regret(game, prof, **br_options)
        ops.append(n)
        consumed += n
        events.append((len(ops) - 1, label, prof, r))
        return r

    def own_utility(prof, i):
        atk = ase_attack(game, prof, tol=delta)
        return defender_utilities(game, prof, atk)[i]

    try:
        current = evaluate(start, "init")
        if current <= tol:
            return done(True)

        prof = start
        while consumed < cap:
            changed = False
            gains = []
            for i in game.defenders:
                if consumed >= cap:
                    return done(False)
                br = milp.best_response(game, i, prof, **br_options)
                ops.append(1)
                consumed += 1
                gain = br.utility - own_utility(prof, i)
                gains.append(gain)
                if gain > _GAIN_EPS:
                    for j, row in br.strategy.dist.items():
                        prof = prof.replace(j, row)
                    changed = True
            if not changed:
                # nobody moved, so the gains were all measured against this
                # very profile: their max is its regret, at no extra cost
                r = max(0.0, max(gains))
                events.append((len(ops) - 1, "round", prof, r))
                return done(True)
            if consumed >= cap:
                break
            r = evaluate(prof, "round")
            if r <= tol:
                return done(True)
    except milp.MilpResourceError as exc:
        return done(False, failed=str(exc))
    return done(False)


def _truncate_core(core: _IbrCore, allowed: int) -> tuple[_IbrCore, int]:
    """Re-account a speculative run as if its budget had been ``allowed``.

    Operations run while the solves already spent stay below the budget, so
    the truncated run is the longest op prefix reachable under that rule.
    Returns the clipped core and its actual solve count.
    """
    consumed = 0
    stop = 0
    for cost in core.ops:
        if consumed >= allowed:
            break
        consumed += cost
        stop += 1
    events = tuple(e for e in core.events if e[0] < stop)
    converged = core.converged and stop == len(core.ops)
    return _IbrCore(core.ops[:stop], events, converged), consumed


def _ibr_task(args):
    game, start, cap, tol, delta, br_options = args
    return _ibr_core(game, start, cap, tol, delta, br_options)


def iterated_best_response(game: InterdependentGame, start: CoverageProfile,
                           cfg: SearchConfig) -> SearchTrace:
    """Round-robin best responses from ``start`` until fixed point or budget."""
    delta = _resolved_delta(game, cfg)
    rec = _Recorder("ibr")
    rec.mark_restart()
    core = _ibr_core(game, start, cfg.iterations, cfg.tol, delta,
                     _soft_br_options(cfg))
    consumed = _replay(core, rec, 0)
    _check_failed(core, game, delta, rec, consumed)
    return rec.trace(game, delta, consumed)


def _check_failed(core: _IbrCore, game, delta, rec, consumed) -> None:
    """Raise with the partial trace when a core ran out of solver resources."""
    if core.failed is not None:
        trace = rec.trace(game, delta, consumed) if rec.best_profile else None
        raise SearchResourceError(core.failed, trace=trace)


def _replay(core: _IbrCore, rec: _Recorder, offset: int) -> int:
    """Feed a core's events into the recorder; returns total solves consumed."""
    cum = np.cumsum(core.ops) if core.ops else np.array([], dtype=int)
    for op_idx, label, prof, value in core.events:
        rec.add(label, prof, value, offset + int(cum[op_idx]))
    return offset + (int(cum[-1]) if len(cum) else 0)


def _restart_profile(game: InterdependentGame, idx: int, seed: int) -> CoverageProfile:
    if idx == 0:
        return corner_profile(game, "idle")
    if idx == 1:
        return corner_profile(game, "full")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2, idx]))
    return sample_profile(game, rng)


def ribr(game: InterdependentGame, cfg: SearchConfig) -> SearchTrace:
    """Iterated best response with corner and random restarts."""
    delta = _resolved_delta(game, cfg)
    opts = _soft_br_options(cfg)
    rec = _Recorder("ribr")
    consumed = 0
    idx = 0
    if cfg.workers == 1:
        while consumed < cfg.iterations and idx < cfg.restart_budget:
            start = _restart_profile(game, idx, cfg.seed)
            core = _ibr_core(game, start, cfg.iterations - consumed,
                             cfg.tol, delta, opts)
            rec.mark_restart()
            consumed = _replay(core, rec, consumed)
            _check_failed(core, game, delta, rec, consumed)
            idx += 1
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            while consumed < cfg.iterations and idx < cfg.restart_budget:
                batch = min(cfg.workers, cfg.restart_budget - idx)
                args = [(game, _restart_profile(game, idx + b, cfg.seed),
                         cfg.iterations - consumed, cfg.tol, delta,
                         opts) for b in range(batch)]
                for core in pool.map(_ibr_task, args):
                    allowed = cfg.iterations - consumed
                    if allowed <= 0 or idx >= cfg.restart_budget:
                        idx += 1
                        continue
                    clipped, _ = _truncate_core(core, allowed)
                    rec.mark_restart()
                    consumed = _replay(clipped, rec, consumed)
                    if len(clipped.ops) == len(core.ops):
                        # fully inside the official budget, so a sequential
                        # run would have hit the same resource failure
                        _check_failed(core, game, delta, rec, consumed)
                    idx += 1
    return rec.trace(game, delta, consumed)


def run_search(game: InterdependentGame, cfg: SearchConfig,
               start: CoverageProfile | None = None) -> SearchTrace:
    """Dispatch on cfg.algorithm; ibr starts from ``start`` or the idle corner."""
    if cfg.algorithm == "rs":
        return random_search(game, cfg)
    if cfg.algorithm == "sa":
        return simulated_annealing(game, cfg)
    if cfg.algorithm == "ibr":
        return iterated_best_response(game, start or corner_profile(game, "idle"), cfg)
    return ribr(game, cfg)
