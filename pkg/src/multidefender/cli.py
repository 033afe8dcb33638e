"""Command line front end.

Subcommands:
    analytic    closed-form equilibrium summaries of the symmetric models
    solve       equilibrium search on a game file
    gen         topology generation
    partition   split a topology into balanced connected regions
    experiment  decentralization sweeps producing results/centrality CSVs

Every command writes CSV (or topology/partition text formats) so downstream
tooling never needs Python imports; ``-`` means stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import netgen
from .analytic import AnalyticResult, baseline_solve, general_solve, multitarget_solve
from .experiment import ExperimentConfig, run_experiment
from .game import load_game
from .milp import build_br_milp, dump_lp
from .search import ALGORITHMS, SearchConfig, run_search

log = logging.getLogger(__name__)

ANALYTIC_COLUMNS = ("ne_exists", "q_star", "epsilon", "sw_eq", "sw_opt",
                    "poa", "poa_kind")


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


# ---------------------------------------------------------------------------
# analytic


def _analytic_row(res: AnalyticResult) -> str:
    vals = (res.ne_exists, res.coverage, res.epsilon, res.sw_eq, res.sw_opt,
            res.poa, res.poa_kind)
    return ",".join(_fmt(v) for v in vals)


def _cmd_analytic(args) -> int:
    def solve_one(k: int | None):
        if args.model == "baseline":
            return baseline_solve(args.v, args.c, args.n)
        if args.model == "multitarget":
            return multitarget_solve(args.v, args.c, args.n, k)
        return general_solve(args.c, args.n, k, args.uc, args.uu, args.omega)

    needs_k = args.model in ("multitarget", "general")
    if needs_k and args.k is None and args.sweep_k is None:
        raise SystemExit(f"model {args.model} needs --k or --sweep-k")
    if args.model == "general" and None in (args.uc, args.uu, args.omega):
        raise SystemExit("model general needs --uc, --uu and --omega")

    if args.sweep_k is not None:
        if not needs_k:
            raise SystemExit(f"model {args.model} has no k to sweep")
        lo, hi = args.sweep_k
        lines = ["k," + ",".join(ANALYTIC_COLUMNS)]
        for k in range(lo, hi + 1):
            lines.append(f"{k}," + _analytic_row(solve_one(k)))
        _write("\n".join(lines) + "\n", args.out)
        return 0

    res = solve_one(args.k)
    _write(",".join(ANALYTIC_COLUMNS) + "\n" + _analytic_row(res) + "\n",
           args.out)
    return 0


# ---------------------------------------------------------------------------
# solve


def _report_csv(trace, game) -> str:
    rep = trace.report
    lines = ["key,value"]
    lines.append(f"algorithm,{trace.algorithm}")
    lines.append(f"epsilon,{_fmt(rep.epsilon)}")
    lines.append(f"welfare,{_fmt(rep.welfare)}")
    lines.append(f"solves,{trace.solves_total}")
    for d in game.defenders:
        lines.append(f"utility:{d},{_fmt(rep.utilities[d])}")
    for j in game.targets:
        lines.append(f"attack:{j},{_fmt(rep.attack.p.get(j, 0.0))}")
    for j in game.targets:
        for o in game.configs[j]:
            lines.append(f"coverage:{j}:{o},{_fmt(rep.profile.q(game, j, o))}")
    return "\n".join(lines) + "\n"


def _trace_csv(trace) -> str:
    lines = ["event,label,regret,best,solves,restart"]
    best = None
    restart = -1
    bounds = set(trace.restarts)
    for i, (label, value, solves) in enumerate(
            zip(trace.labels, trace.values, trace.solves)):
        if i in bounds:
            restart += 1
        best = value if best is None else min(best, value)
        lines.append(f"{i},{label},{_fmt(value)},{_fmt(best)},{solves},{restart}")
    return "\n".join(lines) + "\n"


def _cmd_solve(args) -> int:
    game = load_game(args.game)
    cfg = SearchConfig(algorithm=args.alg, iterations=args.iters,
                       seed=args.seed, tol=args.tol, workers=args.workers)
    trace = run_search(game, cfg)
    _write(_report_csv(trace, game), args.out)
    if args.trace is not None:
        _write(_trace_csv(trace), args.trace)
    if args.dump_lp is not None:
        # one LP file per defender, at the profile the search settled on
        base = Path(args.dump_lp)
        base.mkdir(parents=True, exist_ok=True)
        for d in game.defenders:
            inst = build_br_milp(game, d, trace.report.profile)
            dump_lp(inst, base / f"br_{d}.lp")
    return 0


# ---------------------------------------------------------------------------
# gen / partition


def _cmd_gen(args) -> int:
    if args.kind == "grid":
        t = netgen.grid(args.rows, args.cols)
    elif args.kind == "er":
        t = netgen.erdos_renyi(args.n, args.p_edge, args.seed)
    else:
        t = netgen.preferential_attachment(args.n, args.m_attach, args.seed)
    netgen.save_topology(args.out, t)
    return 0


def _cmd_partition(args) -> int:
    t = netgen.load_topology(args.topology)
    netgen.save_partition(args.out, netgen.partition(t, args.parts))
    return 0


# ---------------------------------------------------------------------------
# experiment


def _cmd_experiment(args) -> int:
    if args.action != "run":
        raise SystemExit(f"unknown experiment action {args.action!r}")
    cfg = ExperimentConfig.load(args.config)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    rows = run_experiment(cfg, seed=args.seed, out=args.out,
                          workers=args.workers)
    log.info("wrote %d rows to %s", len(rows), Path(args.out) / "results.csv")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mdsg",
                                 description="multidefender security games")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analytic", help="closed-form model summary as CSV")
    a.add_argument("model", choices=("baseline", "multitarget", "general"))
    a.add_argument("--v", type=float, default=1.0, help="target value")
    a.add_argument("--c", type=float, required=True, help="defense cost")
    a.add_argument("--n", type=int, required=True, help="number of defenders")
    a.add_argument("--k", type=int, default=None, help="targets per defender")
    a.add_argument("--uc", type=float, default=None, help="covered-attacked utility")
    a.add_argument("--uu", type=float, default=None, help="uncovered-attacked utility")
    a.add_argument("--omega", type=float, default=None, help="not-attacked utility")
    a.add_argument("--sweep-k", type=_parse_range, default=None,
                   metavar="LO:HI", help="emit one row per k in the range")
    a.add_argument("--out", default=None, help="output CSV (default stdout)")
    a.set_defaults(func=_cmd_analytic)

    s = sub.add_parser("solve", help="search for an equilibrium of a game file")
    s.add_argument("--game", required=True, help="game JSON file")
    s.add_argument("--alg", choices=ALGORITHMS, default="ribr")
    s.add_argument("--iters", type=int, default=1000,
                   help="budget in best-response solves")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", default=None, help="report CSV (default stdout)")
    s.add_argument("--trace", default=None, help="per-event trace CSV")
    s.add_argument("--dump-lp", default=None, metavar="DIR",
                   help="write each defender's best-response LP to DIR")
    s.set_defaults(func=_cmd_solve)

    g = sub.add_parser("gen", help="generate a topology file")
    g.add_argument("kind", choices=("grid", "er", "ba"))
    g.add_argument("--rows", type=int, default=4)
    g.add_argument("--cols", type=int, default=4)
    g.add_argument("--n", type=int, default=64)
    g.add_argument("--p-edge", type=float, default=0.1)
    g.add_argument("--m-attach", type=int, default=2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen)

    p = sub.add_parser("partition", help="balanced connected graph partition")
    p.add_argument("--topology", required=True)
    p.add_argument("--parts", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_partition)

    e = sub.add_parser("experiment", help="run a decentralization sweep")
    e.add_argument("action", choices=("run",))
    e.add_argument("--config", required=True, help="experiment JSON config")
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--seed", type=int, default=0, help="master seed")
    e.set_defaults(func=_cmd_experiment)

    return ap


def _parse_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    lo_i, hi_i = int(lo), int(hi)
    if lo_i < 1 or hi_i < lo_i:
        raise argparse.ArgumentTypeError(f"bad range {text!r}")
    return lo_i, hi_i


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
