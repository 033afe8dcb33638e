"""Mixed-integer best response against fixed opponent strategies.

The program maximizes u - sum_j sum_o c_j^o q_{i,j}^o where u is the mean of
the defender's expected utilities over the attacker's tied-best targets.
Binary a_j marks target j as attacked; the stability scheme widens the tie
window by delta on one side and forces non-attacked targets at least
(1-delta)/M below the optimal attacker value on the other, which requires
M*delta < 1 - delta. With the default margin (4*M*delta <= 1) every feasible
attack vector coincides with the delta-tolerance tie set used by
:func:`multidefender.game.ase_attack`, so solutions re-simulate exactly.

Solving is branch and bound over the a_j, with node relaxations handled by
the embedded simplex. Opponent-owned targets never get binaries there: their
attacker values are constants, so their tie membership is a step function of
the optimal attacker value and collapses into two regimes (the top opponent
value anchors the attack, or an own target tops it by more than the tie
window). The exhaustive grid oracle used to validate the solver lives here
too and shares nothing with it past the game accessors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ._simplex import LpSolution, ReusableLp, solve_lp
from .game import (CoverageProfile, InterdependentGame, ase_attack, attacker_value,
                   defender_utilities, validate_profile)

DEFAULT_DELTA = 1e-3
_INT_TOL = 1e-6


class MilpConfigError(ValueError):
    """delta/M pair violates the stability requirement or M is too small."""


class MilpDiagnosticError(RuntimeError):
    """MILP utility and re-simulated utility disagree beyond tolerance."""


class MilpResourceError(RuntimeError):
    """Node cap exhausted; carries the best incumbent found so far."""

    def __init__(self, message: str, incumbent=None):
        super().__init__(message)
        self.incumbent = incumbent


def resolve_stability(game: InterdependentGame, delta: float | None = None,
                      m_big: float | None = None) -> tuple[float, float]:
    """Fill in and validate the (delta, M) pair for a game.

    Defaults: M is 100x the larger of the attacker-value spread and the
    defender-utility spread, so a target excluded from the attack set only
    needs to sit (1-delta)/M (about 1% of scale) below the attacker optimum;
    delta = min(1e-3, 1/(4M)) keeps the margin 4*M*delta <= 1, under which
    MILP attack sets coincide with delta-tolerance tie sets.
    """
    v_entries = [v for j in game.targets for v in game.attacker_val[j].values()]
    u_entries = [u for i in game.defenders for j in game.targets
                 for u in game.defender_util[i][j].values()]
    spread = max(max(v_entries) - min(v_entries),
                 max(u_entries) - min(u_entries))
    if m_big is None:
        m_big = max(100.0 * spread, spread + 1.0)
    elif m_big <= spread:
        raise MilpConfigError(
            f"m_big={m_big!r} must exceed the attacker-value/utility spread {spread!r}")
    if delta is None:
        delta = min(DEFAULT_DELTA, 1.0 / (4.0 * m_big))
    if not (0.0 < delta < 1.0):
        raise MilpConfigError(f"delta must lie in (0, 1), got {delta!r}")
    if m_big * delta >= 1.0 - delta:
        raise MilpConfigError(
            f"stability needs M*delta < 1-delta; got M={m_big!r}, delta={delta!r}")
    return float(delta), float(m_big)


@dataclass(frozen=True)
class BestResponse:
    """One defender's computed best response.

    strategy covers the defender's own targets only; utility is the MILP
    objective (mean utility over attacked targets minus expected cost);
    simulated_utility is the model-core re-evaluation when available.
    """

    strategy: CoverageProfile
    utility: float
    attack_support: tuple[str, ...]
    simulated_utility: float | None = None
    diagnostics: Mapping[str, object] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Exhaustive grid oracle. Built and frozen before the solver; keep independent.

def grid_best_response(game: InterdependentGame, defender: str, profile: CoverageProfile,
                       step: float = 0.01, tie_tol: float | None = None,
                       max_points: int = 2_000_000) -> BestResponse:
    """Best response by brute force over a per-target coverage grid.

    Only two-configuration targets are supported: each own target's strategy
    is parameterized by the probability of its first configuration. The
    attacker follows the tie-tolerance semantics of ``ase_attack`` with
    ``tie_tol`` (default: the game's resolved delta, matching the MILP).
    """
    if defender not in game.defenders:
        raise ValueError(f"unknown defender {defender}")
    validate_profile(game, profile)
    if tie_tol is None:
        tie_tol = resolve_stability(game)[0]
    own = [j for j in game.targets if game.owner[j] == defender]
    for j in own:
        if len(game.configs[j]) != 2:
            raise ValueError("grid oracle handles two-configuration targets only")
    grid = np.round(np.arange(0.0, 1.0 + step / 2, step), 12)
    if grid[-1] < 1.0:
        grid = np.append(grid, 1.0)
    shape = (len(grid),) * len(own)
    n_pts = int(np.prod(shape)) if own else 1
    if n_pts > max_points:
        raise ValueError(f"grid of {n_pts} points exceeds max_points={max_points}")

    opp_const = {}
    for j in game.targets:
        if j not in own:
            util = game.defender_util[defender][j]
            opp_const[j] = (attacker_value(game, profile, j),
                            sum(p * util[o]
                                for p, o in zip(profile.dist[j], game.configs[j])))

    best_val = -np.inf
    best_cov: dict[str, float] = {}
    best_mask = None
    chunk = 200_000
    for start in range(0, n_pts, chunk):
        idx = np.arange(start, min(start + chunk, n_pts))
        multi = np.unravel_index(idx, shape) if own else ()
        cov = {j: grid[multi[k]] for k, j in enumerate(own)}
        ev_cols, x_cols = [], []
        for j in game.targets:
            if j in cov:
                o0, o1 = game.configs[j]
                vals, util = game.attacker_val[j], game.defender_util[defender][j]
                g = cov[j]
                ev_cols.append(g * vals[o0] + (1.0 - g) * vals[o1])
                x_cols.append(g * util[o0] + (1.0 - g) * util[o1])
            else:
                ev_cols.append(np.full(len(idx), opp_const[j][0]))
                x_cols.append(np.full(len(idx), opp_const[j][1]))
        ev = np.column_stack(ev_cols)
        x = np.column_stack(x_cols)
        mask = ev >= (ev.max(axis=1) - tie_tol)[:, None]
        util = (x * mask).sum(axis=1) / mask.sum(axis=1)
        for j in own:
            o0, o1 = game.configs[j]
            util -= cov[j] * game.cost[j][o0] + (1.0 - cov[j]) * game.cost[j][o1]
        k = int(np.argmax(util))
        if util[k] > best_val:         # strict: keeps the first global argmax
            best_val = float(util[k])
            best_cov = {j: float(cov[j][k]) for j in own}
            best_mask = mask[k]

    rows = {j: (best_cov[j], 1.0 - best_cov[j]) for j in own}
    support = tuple(j for k, j in enumerate(game.targets) if best_mask[k])
    return BestResponse(strategy=CoverageProfile(rows), utility=best_val,
                        attack_support=support,
                        diagnostics={"points": n_pts, "step": step, "tie_tol": tie_tol})


# ---------------------------------------------------------------------------
# Declarative instance: the full labeled constraint system, used for audits,
# LP dumps and the linearization checks. The branch-and-bound works on a
# condensed numeric copy (see _ReducedLp) that a test pins to the same optimum.

@dataclass(frozen=True)
class LinearRow:
    name: str
    group: str
    coef: Mapping[str, float]
    sense: str                  # "<=", ">=" or "=="
    rhs: float


@dataclass(frozen=True)
class MilpInstance:
    game: InterdependentGame
    defender: str
    profile: CoverageProfile    # opponent rows are read; own rows ignored
    delta: float
    m_big: float
    variables: tuple[str, ...]
    bounds: Mapping[str, tuple[float, float]]
    binaries: tuple[str, ...]
    objective: Mapping[str, float]       # maximized
    rows: tuple[LinearRow, ...]

    def group_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.rows:
            out[r.group] = out.get(r.group, 0) + 1
        return out


def _target_data(game, defender, profile):
    """Per-target attacker-value and defender-utility ranges and constants."""
    own = [j for j in game.targets if game.owner[j] == defender]
    data = {}
    for j in game.targets:
        vals = game.attacker_val[j]
        util = game.defender_util[defender][j]
        if j in own:
            data[j] = {
                "own": True,
                "v_lo": min(vals.values()), "v_hi": max(vals.values()),
                "x_lo": min(util.values()), "x_hi": max(util.values()),
            }
        else:
            ev = attacker_value(game, profile, j)
            xc = sum(p * util[o] for p, o in zip(profile.dist[j], game.configs[j]))
            data[j] = {"own": False, "v_lo": ev, "v_hi": ev, "x_lo": xc, "x_hi": xc}
    return own, data


def build_br_milp(game: InterdependentGame, defender: str, profile: CoverageProfile,
                  delta: float | None = None, m_big: float | None = None) -> MilpInstance:
    """Emit the full constraint system for one defender's best response."""
    if defender not in game.defenders:
        raise ValueError(f"unknown defender {defender}")
    validate_profile(game, profile)
    delta, m = resolve_stability(game, delta, m_big)
    own, data = _target_data(game, defender, profile)

    u_lo = min(d["x_lo"] for d in data.values())
    u_hi = max(d["x_hi"] for d in data.values())
    v_lo = max(d["v_lo"] for d in data.values())
    v_hi = max(d["v_hi"] for d in data.values()) + delta

    variables: list[str] = []
    bounds: dict[str, tuple[float, float]] = {}

    def var(name, lo, hi):
        variables.append(name)
        bounds[name] = (lo, hi)
        return name

    qv = {(j, o): var(f"q[{j},{o}]", 0.0, 1.0) for j in own for o in game.configs[j]}
    av = {j: var(f"a[{j}]", 0.0, 1.0) for j in game.targets}
    var("v", v_lo, v_hi)
    var("u", u_lo, u_hi)
    sv = {j: var(f"s[{j}]", 0.0, np.inf) for j in game.targets}
    xv = {}
    for j in game.targets:
        d = data[j]
        xv[j] = var(f"x[{j}]", d["x_lo"], d["x_hi"])
    yv = {j: var(f"y[{j}]", min(0.0, u_lo), max(0.0, u_hi)) for j in game.targets}
    wv = {j: var(f"w[{j}]", min(0.0, data[j]["x_lo"]), max(0.0, data[j]["x_hi"]))
          for j in game.targets}

    rows: list[LinearRow] = []

    def row(name, group, coef, sense, rhs):
        rows.append(LinearRow(name, group, dict(coef), sense, float(rhs)))

    def ev_coef(j):
        # attacker expected value at j as {var: coef}, plus constant part
        if data[j]["own"]:
            return {qv[j, o]: game.attacker_val[j][o] for o in game.configs[j]}, 0.0
        return {}, data[j]["v_lo"]

    for j in own:
        row(f"simplex[{j}]", "simplex",
            {qv[j, o]: 1.0 for o in game.configs[j]}, "==", 1.0)

    for j in game.targets:
        ev, const = ev_coef(j)
        # 0 <= v - EV_j  and  v - EV_j <= (1-a_j)M + delta
        row(f"gap_lo[{j}]", "gap_lo", {"v": 1.0, **{k: -c for k, c in ev.items()}},
            ">=", const)
        row(f"gap_hi[{j}]", "gap_hi",
            {"v": 1.0, **{k: -c for k, c in ev.items()}, av[j]: m}, "<=",
            const + m + delta)
        row(f"slack_def[{j}]", "slack_def",
            {sv[j]: 1.0, "v": -1.0, **ev}, "==", -const)
        row(f"support_force[{j}]", "support_force",
            {av[j]: 1.0, sv[j]: m}, ">=", 1.0 - delta)

    row("attack_nonempty", "attack_nonempty", {av[j]: 1.0 for j in game.targets},
        ">=", 1.0)

    for j in own:
        row(f"x_def[{j}]", "x_def",
            {xv[j]: 1.0, **{qv[j, o]: -game.defender_util[defender][j][o]
                            for o in game.configs[j]}}, "==", 0.0)

    for j in game.targets:
        a = av[j]
        row(f"y_ub_a[{j}]", "mccormick_y", {yv[j]: 1.0, a: -u_hi}, "<=", 0.0)
        row(f"y_lb_a[{j}]", "mccormick_y", {yv[j]: -1.0, a: u_lo}, "<=", 0.0)
        row(f"y_ub_u[{j}]", "mccormick_y", {yv[j]: 1.0, "u": -1.0, a: -u_lo}, "<=", -u_lo)
        row(f"y_lb_u[{j}]", "mccormick_y", {yv[j]: -1.0, "u": 1.0, a: u_hi}, "<=", u_hi)
        lo_x, hi_x = data[j]["x_lo"], data[j]["x_hi"]
        row(f"w_ub_a[{j}]", "mccormick_w", {wv[j]: 1.0, a: -hi_x}, "<=", 0.0)
        row(f"w_lb_a[{j}]", "mccormick_w", {wv[j]: -1.0, a: lo_x}, "<=", 0.0)
        row(f"w_ub_x[{j}]", "mccormick_w", {wv[j]: 1.0, xv[j]: -1.0, a: -lo_x}, "<=", -lo_x)
        row(f"w_lb_x[{j}]", "mccormick_w", {wv[j]: -1.0, xv[j]: 1.0, a: hi_x}, "<=", hi_x)

    row("link", "link",
        {**{yv[j]: 1.0 for j in game.targets},
         **{wv[j]: -1.0 for j in game.targets}}, "==", 0.0)

    objective = {"u": 1.0}
    for j in own:
        for o in game.configs[j]:
            objective[qv[j, o]] = -game.cost[j][o]

    return MilpInstance(game=game, defender=defender, profile=profile, delta=delta,
                        m_big=m, variables=tuple(variables), bounds=bounds,
                        binaries=tuple(av[j] for j in game.targets),
                        objective=objective, rows=tuple(rows))


def _assemble(inst: MilpInstance, fixed: Mapping[str, float] | None = None):
    """Matrices for the declarative system, binaries relaxed to [0,1]."""
    idx = {name: k for k, name in enumerate(inst.variables)}
    n = len(inst.variables)
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for r in inst.rows:
        vec = np.zeros(n)
        for name, c in r.coef.items():
            vec[idx[name]] = c
        if r.sense == "==":
            a_eq.append(vec)
            b_eq.append(r.rhs)
        elif r.sense == "<=":
            a_ub.append(vec)
            b_ub.append(r.rhs)
        else:
            a_ub.append(-vec)
            b_ub.append(-r.rhs)
    bounds = np.array([inst.bounds[name] for name in inst.variables])
    if fixed:
        for name, val in fixed.items():
            bounds[idx[name]] = (val, val)
    c = np.zeros(n)
    for name, coef in inst.objective.items():
        c[idx[name]] = coef
    return c, np.array(a_ub), np.array(b_ub), np.array(a_eq), np.array(b_eq), bounds, idx


def lp_relaxation(inst: MilpInstance) -> tuple[float, dict[str, float]]:
    """Optimal value of the continuous relaxation of the full system."""
    c, a_ub, b_ub, a_eq, b_eq, bounds, idx = _assemble(inst)
    res = solve_lp(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds,
                   maximize=True)
    if res.status != "optimal":
        raise RuntimeError(f"relaxation not solvable: {res.status}")
    return res.objective, {name: float(res.x[k]) for name, k in idx.items()}


def solve_with_support(inst: MilpInstance, support) -> tuple[float, dict[str, float]]:
    """Solve the full system with the attack vector fixed to ``support``.

    Returns the objective and the solution; raises if the pattern is
    infeasible under the stability constraints.
    """
    support = set(support)
    fixed = {f"a[{j}]": (1.0 if j in support else 0.0) for j in inst.game.targets}
    c, a_ub, b_ub, a_eq, b_eq, bounds, idx = _assemble(inst, fixed)
    res = solve_lp(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds,
                   maximize=True)
    if res.status != "optimal":
        raise RuntimeError(f"fixed-support solve failed: {res.status}")
    return res.objective, {name: float(res.x[k]) for name, k in idx.items()}


def dump_lp(inst: MilpInstance, path) -> None:
    """Write the instance in LP text format for external cross-checking."""

    def term(c, name, lead):
        sign = "-" if c < 0 else ("" if lead else "+")
        mag = abs(c)
        return f"{sign} {mag:.12g} {name}" if not lead else f"{sign}{mag:.12g} {name}"

    lines = [f"\\ best response for defender {inst.defender} "
             f"(delta={inst.delta:g}, M={inst.m_big:g})", "Maximize", " obj:"]
    parts = [term(c, nm, k == 0) for k, (nm, c) in enumerate(inst.objective.items())]
    lines[-1] += " " + " ".join(parts)
    lines.append("Subject To")
    for r in inst.rows:
        parts = [term(c, nm, k == 0) for k, (nm, c) in enumerate(r.coef.items())]
        op = {"<=": "<=", ">=": ">=", "==": "="}[r.sense]
        lines.append(f" {r.name}: " + " ".join(parts) + f" {op} {r.rhs:.12g}")
    lines.append("Bounds")
    for name in inst.variables:
        lo, hi = inst.bounds[name]
        hi_s = "+inf" if np.isinf(hi) else f"{hi:.12g}"
        lines.append(f" {lo:.12g} <= {name} <= {hi_s}")
    lines.append("Binaries")
    lines.append(" " + " ".join(inst.binaries))
    lines.append("End")
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# Branch and bound on the condensed system.

class _ReducedLp:
    """Node relaxations for branch and bound, conditioned on regime and size.

    The u/y mean linearization relaxes terribly: fractional a_j let the LP
    ride the McCormick envelopes and report near-zero loss no matter the
    game. Fixing the support size K removes u entirely, because on integral
    points u = (sum_j w_j)/K, which is linear. The solver therefore branches
    on K at the top level and this class builds the K-conditioned system:
    no u or y columns, objective (1/K) sum w - cost, sum of a fixed to K.

    Opponent targets carry no binaries. Their attacker values are constants,
    so whether one is attacked depends only on where the optimal value v
    lands, and only two regimes exist:

    * "anchored": the top opponent value e1 is also the overall optimum.
      Then v = e1 and the attacked opponents are exactly the constants
      within delta of e1, a set known at build time. Own targets join the
      attack iff their value reaches e1 - delta.
    * "interior": an own target tops every opponent by more than the tie
      window (v >= e1 + 2 delta), and no opponent is attacked.

    A uniform exclusion margin for opponent constants, by contrast, turns
    genuinely solvable games infeasible whenever two constants sit between
    delta and the margin apart, which iterated best-response play produces
    routinely.

    Presolve: any own target whose best attainable attacker value is below
    (max_j of worst attainable) - delta can never be attacked; its a_j is
    dropped and only its exclusion constraint survives.
    """

    def __init__(self, inst: MilpInstance):
        g, i = inst.game, inst.defender
        delta, m = inst.delta, inst.m_big
        self.inst = inst
        own, data = _target_data(g, i, inst.profile)
        self.own = own
        L_star = max(d["v_lo"] for d in data.values())
        self.presolve_off = tuple(j for j in own if data[j]["v_hi"] < L_star - delta)
        live = [j for j in own if j not in set(self.presolve_off)]
        self.live = live
        sep = (1.0 - delta) / m  # minimum gap below v for excluded own targets

        opp = [j for j in g.targets if not data[j]["own"]]
        v_hi = max(d["v_hi"] for d in data.values()) + delta
        self.windows: dict[str, tuple[float, float]] = {}
        if opp:
            e1 = max(data[j]["v_lo"] for j in opp)
            self.anchor = tuple(j for j in opp if data[j]["v_lo"] >= e1 - delta)
            self.x_anchor = sum(data[j]["x_lo"] for j in self.anchor)
            if e1 >= L_star:          # no own target is forced above e1
                self.windows["A"] = (e1, e1)
            # strict slack: optimal points ride this floor, and the ejected
            # opponent must land strictly outside the closed tie window
            lo_b = max(L_star, e1 + (2.0 + 1e-7) * delta)
            if live and lo_b <= v_hi:
                self.windows["B"] = (lo_b, v_hi)
            if not self.windows:
                # own attainable values pinned inside (e1, e1 + delta): let
                # the anchor float through the sliver rather than fail
                self.windows["A"] = (e1, min(e1 + delta, v_hi))
        else:
            self.anchor = ()
            self.x_anchor = 0.0
            self.windows["B"] = (L_star, v_hi)

        # columns: own q's, live a's, v, live w's
        cols: list[tuple] = []
        self.q_at: dict[tuple[str, str], int] = {}
        for j in own:
            for o in g.configs[j]:
                self.q_at[j, o] = len(cols)
                cols.append(("q", 0.0, 1.0))
        self.a_at = {}
        for j in live:
            self.a_at[j] = len(cols)
            cols.append(("a", 0.0, 1.0))
        self.v_at = len(cols)
        cols.append(("v", L_star, v_hi))
        self.w_at = {}
        for j in live:
            self.w_at[j] = len(cols)
            cols.append(("w", min(0.0, data[j]["x_lo"]), max(0.0, data[j]["x_hi"])))

        n = len(cols)
        self.n = n
        self.base_bounds = np.array([(lo, hi) for _, lo, hi in cols])

        ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []

        def push_ub(terms, rhs):
            vec = np.zeros(n)
            for k, c in terms:
                vec[k] += c
            ub_rows.append(vec)
            ub_rhs.append(rhs)

        def push_eq(terms, rhs):
            vec = np.zeros(n)
            for k, c in terms:
                vec[k] += c
            eq_rows.append(vec)
            eq_rhs.append(rhs)

        for j in own:
            push_eq([(self.q_at[j, o], 1.0) for o in g.configs[j]], 1.0)

        for j in own:
            ev = [(self.q_at[j, o], g.attacker_val[j][o]) for o in g.configs[j]]
            # EV_j - v <= 0
            push_ub(ev + [(self.v_at, -1.0)], 0.0)
            if j in self.a_at:
                a = self.a_at[j]
                # Interval-tight forms of the big-M pair. They agree with the
                # declarative rows at binary a_j but are far stronger
                # fractionally, which is what makes the node bounds usable.
                # The attacked window is shaved by a relative 1e-7 so that an
                # optimum riding its lower edge still lands strictly inside
                # the closed tie window after float round-trips.
                # v - EV_j <= datt a_j + smax_j (1 - a_j)
                smax = v_hi - data[j]["v_lo"]
                datt = delta * (1.0 - 1e-7)
                push_ub([(self.v_at, 1.0), (a, smax - datt)] + [(k, -c) for k, c in ev],
                        smax)
                # a_j >= 1 - (v - EV_j)/sep, scaled by sep
                push_ub([(a, -sep), (self.v_at, -1.0)] + ev, -sep)
            else:
                # permanently excluded own target: EV_j <= v - sep
                push_ub(ev + [(self.v_at, -1.0)], -sep)

        for j in live:
            a, w = self.a_at[j], self.w_at[j]
            lo_x, hi_x = data[j]["x_lo"], data[j]["x_hi"]
            xt = [(self.q_at[j, o], g.defender_util[i][j][o]) for o in g.configs[j]]
            push_ub([(w, 1.0), (a, -hi_x)], 0.0)
            push_ub([(w, -1.0), (a, lo_x)], 0.0)
            push_ub([(w, 1.0), (a, -lo_x)] + [(k, -c) for k, c in xt], -lo_x)
            push_ub([(w, -1.0), (a, hi_x)] + [(k, c) for k, c in xt], hi_x)

        push_eq([(self.a_at[j], 1.0) for j in live], 1.0)   # rhs mutated to k

        self.A_ub = np.array(ub_rows)
        self.b_ub = np.array(ub_rhs)
        self.A_eq = np.array(eq_rows)
        self.b_eq = np.array(eq_rhs)
        self.cost_vec = np.zeros(n)
        for j in own:
            for o in g.configs[j]:
                self.cost_vec[self.q_at[j, o]] -= g.cost[j][o]
        self.data = data
        self.lp_calls = 0
        self.lp_iterations = 0
        self._lp: dict[tuple[str, int], ReusableLp] = {}

    def _lp_for(self, mode: str, k: int) -> ReusableLp:
        """One warm-startable LP per (regime, own support size) pair."""
        lp = self._lp.get((mode, k))
        if lp is None:
            total = k + (len(self.anchor) if mode == "A" else 0)
            c = self.cost_vec.copy()
            for j in self.live:
                c[self.w_at[j]] = 1.0 / total
            b_eq = self.b_eq.copy()
            b_eq[-1] = float(k)
            lp = ReusableLp(c, A_ub=self.A_ub, b_ub=self.b_ub, A_eq=self.A_eq,
                            b_eq=b_eq, maximize=True)
            self._lp[mode, k] = lp
        return lp

    def solve(self, mode: str, k: int, fixings: Mapping[str, int]):
        window = self.windows.get(mode)
        if window is None:
            return LpSolution("infeasible", None, float("nan"), 0)
        bounds = self.base_bounds.copy()
        bounds[self.v_at] = window
        for j, val in fixings.items():
            bounds[self.a_at[j]] = (float(val), float(val))
        res = self._lp_for(mode, k).solve(bounds)
        self.lp_calls += 1
        self.lp_iterations += res.iterations
        if mode == "A" and res.status == "optimal":
            # attacked opponents contribute a constant to the mean
            total = k + len(self.anchor)
            res = LpSolution("optimal", res.x,
                             res.objective + self.x_anchor / total, res.iterations)
        return res

    def a_values(self, x):
        return {j: float(x[k]) for j, k in self.a_at.items()}

    def x_value(self, x, j):
        """Defender's expected utility at target j for the LP point x."""
        d = self.data[j]
        if not d["own"]:
            return d["x_lo"]
        g, i = self.inst.game, self.inst.defender
        return sum(x[self.q_at[j, o]] * g.defender_util[i][j][o]
                   for o in g.configs[j])

    def sim_support(self, x) -> tuple[str, ...]:
        """Tie set of the attacker values induced by the LP point's coverage."""
        ev = []
        for j in self.inst.game.targets:
            if self.data[j]["own"]:
                gm = self.inst.game
                ev.append(sum(x[self.q_at[j, o]] * gm.attacker_val[j][o]
                              for o in gm.configs[j]))
            else:
                ev.append(self.data[j]["v_lo"])
        ev = np.array(ev)
        top = ev.max() - self.inst.delta
        return tuple(j for j, e in zip(self.inst.game.targets, ev) if e >= top)


def solve_milp(inst: MilpInstance, node_cap: int = 1_000_000,
               rel_gap: float = 1e-6) -> BestResponse:
    """Globally optimal best response by two-level branch and bound.

    The top level branches on the attack-support size K (which makes the
    mean utility linear and the relaxations sharp); K subtrees are processed
    best-first by root bound. Inside a subtree: depth-first on the most
    fractional a_j, diving toward the LP's rounding, with a tie-set rounding
    heuristic supplying incumbents early. Deterministic throughout.
    """
    red = _ReducedLp(inst)
    best_val = -np.inf
    best_x = None
    best_fix = None
    best_mode = None
    nodes = 0
    tried: set[tuple[str, frozenset]] = set()

    def gap_floor():
        return best_val + rel_gap * (1.0 + abs(best_val))

    def try_own(mode: str, own_key: frozenset) -> None:
        nonlocal best_val, best_x, best_fix, best_mode
        if mode not in red.windows or (mode == "B" and not own_key):
            return
        key = (mode, own_key)
        if key in tried or len(tried) >= 256:
            return
        tried.add(key)
        fix = {j: (1 if j in own_key else 0) for j in red.live}
        r = red.solve(mode, len(own_key), fix)
        if r.status == "optimal" and r.objective > best_val:
            best_val, best_x, best_fix, best_mode = r.objective, r.x, fix, mode

    def try_support(support) -> None:
        """Split a candidate tie set into a regime plus own-target support."""
        own_part = frozenset(j for j in support if j in red.a_at)
        rest = frozenset(support) - own_part - set(red.presolve_off)
        if rest:
            if rest == frozenset(red.anchor):
                try_own("A", own_part)
        else:
            try_own("B", own_part)
            if red.anchor:
                try_own("A", own_part)

    # seed incumbents with the natural candidates: top slices of targets by
    # best attainable attacker value, then each root's induced tie set
    order = sorted((j for j in inst.game.targets
                    if j in red.a_at or not red.data[j]["own"]),
                   key=lambda j: (-red.data[j]["v_hi"], inst.game.targets.index(j)))
    for top in range(1, min(8, len(order)) + 1):
        try_support(frozenset(order[:top]))

    roots = []
    for mode in sorted(red.windows):
        lo_k = 0 if mode == "A" else 1
        for k in range(lo_k, len(red.live) + 1):
            res = red.solve(mode, k, {})
            nodes += 1
            if res.status != "optimal":
                continue
            try_support(red.sim_support(res.x))
            roots.append((res.objective, mode, k, res))
    roots.sort(key=lambda t: (-t[0], t[1], t[2]))

    for root_obj, mode, k, root_res in roots:
        if root_obj <= gap_floor():
            continue
        stack: list[tuple[dict, float, object]] = [({}, root_obj, root_res)]
        while stack:
            fixings, parent_bound, cached = stack.pop()
            if parent_bound <= gap_floor():
                continue
            free = [j for j in red.live if j not in fixings]
            ones = sum(fixings.values())
            if ones > k or ones + len(free) < k:
                continue
            if ones == k or ones + len(free) == k:
                # cardinality forces the remaining choices; no relaxation needed
                fill = 0 if ones == k else 1
                fix = dict(fixings)
                fix.update({j: fill for j in free})
                sup = frozenset(j for j, v in fix.items() if v == 1)
                if (mode, sup) not in tried and len(tried) >= 256:
                    tried.clear()
                try_own(mode, sup)
                continue
            if nodes >= node_cap:
                inc = _package(inst, red, best_val, best_x, best_fix, best_mode,
                               nodes) if best_x is not None else None
                raise MilpResourceError(f"node cap {node_cap} exhausted", incumbent=inc)
            if cached is None:
                nodes += 1
                res = red.solve(mode, k, fixings)
            else:
                res = cached
            if res.status == "infeasible":
                continue
            if res.status != "optimal":
                raise RuntimeError(f"node relaxation returned {res.status}")
            if res.objective <= gap_floor():
                continue
            try_support(red.sim_support(res.x))
            if res.objective <= gap_floor():
                continue
            a = red.a_values(res.x)
            frac = {j: min(a[j], 1.0 - a[j]) for j in free}
            branch_j = None
            worst = _INT_TOL
            for j in red.live:                    # deterministic target order
                if j in frac and frac[j] > worst:
                    worst = frac[j]
                    branch_j = j
            if branch_j is None:
                # integral within tolerance: evaluate with binaries fixed
                # exactly so the incumbent value is not polluted by
                # O(M * int_tol) slack in the big-M rows
                support = frozenset(j for j in red.live
                                    if fixings.get(j, round(a[j])) == 1)
                if (mode, support) not in tried and len(tried) >= 256:
                    tried.clear()              # never drop a true candidate
                try_own(mode, support)
                continue
            near = int(round(a[branch_j]))
            far_fix = dict(fixings)
            far_fix[branch_j] = 1 - near
            near_fix = dict(fixings)
            near_fix[branch_j] = near
            stack.append((far_fix, res.objective, None))
            stack.append((near_fix, res.objective, None))   # popped first: dive

    if best_x is None:
        raise RuntimeError("best-response MILP infeasible; game tables are inconsistent")
    return _package(inst, red, best_val, best_x, best_fix, best_mode, nodes)


def _package(inst, red, value, x, a_fix, mode, nodes) -> BestResponse:
    g = inst.game
    rows = {}
    for j in red.own:
        raw = [max(0.0, float(x[red.q_at[j, o]])) for o in g.configs[j]]
        total = sum(raw)
        rows[j] = tuple(p / total for p in raw)
    anchored = frozenset(red.anchor) if mode == "A" else frozenset()
    support = tuple(j for j in g.targets
                    if j in anchored or (j in red.a_at and a_fix.get(j, 0) == 1))
    mean_x = sum(red.x_value(x, j) for j in support) / len(support)
    spend = sum(float(x[red.q_at[j, o]]) * g.cost[j][o]
                for j in red.own for o in g.configs[j])
    direct = mean_x - spend
    if abs(direct - value) > 1e-6 * (1.0 + abs(value)):
        raise RuntimeError(
            f"linearization drift: objective {value!r} vs direct {direct!r}")
    return BestResponse(
        strategy=CoverageProfile(rows), utility=float(value), attack_support=support,
        diagnostics={"nodes": nodes, "lp_calls": red.lp_calls,
                     "lp_iterations": red.lp_iterations,
                     "presolve_off": red.presolve_off, "regime": mode,
                     "delta": inst.delta, "m_big": inst.m_big})


def best_response(game: InterdependentGame, defender: str, profile: CoverageProfile,
                  delta: float | None = None, m_big: float | None = None,
                  node_cap: int = 1_000_000, check: bool | str = True) -> BestResponse:
    """Build and solve the best-response program, then re-simulate it.

    The returned utility is cross-checked by replaying the strategy through
    the model core with the attacker tie window set to delta. ``check`` may
    be True (raise on mismatch > 1e-3), "warn", or False.
    """
    inst = build_br_milp(game, defender, profile, delta, m_big)
    br = solve_milp(inst, node_cap=node_cap)
    merged = profile
    for j, row in br.strategy.dist.items():
        merged = merged.replace(j, row)
    attack = ase_attack(game, merged, tol=inst.delta)
    sim = defender_utilities(game, merged, attack)[defender]
    if abs(sim - br.utility) > 1e-3 and check:
        msg = (f"simulated utility {sim!r} deviates from MILP value "
               f"{br.utility!r}; delta/M configuration is likely unstable")
        if check == "warn":
            warnings.warn(msg)
        else:
            raise MilpDiagnosticError(msg)
    return BestResponse(strategy=br.strategy, utility=br.utility,
                        attack_support=br.attack_support, simulated_utility=sim,
                        diagnostics=br.diagnostics)
