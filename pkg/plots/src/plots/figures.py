"""Render sweep results, solver traces and analytic curves as figures.

Everything here is CSV-to-image plumbing: tables are grouped, averaged and
drawn, but no game quantity is ever recomputed. The solver package is the
single source of truth for the numbers; if a figure looks wrong, the fix
belongs there, not here.

Inputs are the CSV files the ``mdsg`` driver writes: ``results.csv`` and
``centrality.csv`` from ``mdsg experiment run``, per-round trace files from
``mdsg solve --trace``, and sweep tables from ``mdsg analytic --sweep-k``.
Rendering is deterministic: identical input bytes produce identical output
bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd

KINDS = ("welfare", "strategy", "regret", "poa", "centrality")

# columns each kind requires in every input table
REQUIRED = {
    "welfare": ("players", "p", "welfare_eq", "welfare_opt"),
    "strategy": ("players", "p", "avg_coverage"),
    "regret": ("solves", "best"),
    "poa": ("k", "poa"),
    "centrality": ("p", "closeness", "coverage"),
}

_FIGSIZE = (6.0, 4.0)
_DPI = 150


class FigureError(ValueError):
    """The figure cannot be rendered from the given inputs."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure: a kind, its input tables and the image destination."""

    kind: str
    inputs: tuple[Path, ...]
    out: Path

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise FigureError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {', '.join(KINDS)}")
        if not self.inputs:
            raise FigureError("at least one input CSV is required")
        object.__setattr__(self, "inputs", tuple(Path(p) for p in self.inputs))
        object.__setattr__(self, "out", Path(self.out))


def load_table(path: Path, kind: str) -> pd.DataFrame:
    """Read one CSV, skipping ``#`` comment headers; validate the columns."""
    if not path.exists():
        raise FigureError(f"{path}: no such file")
    try:
        df = pd.read_csv(path, comment="#")
    except pd.errors.EmptyDataError:
        raise FigureError(f"{path}: empty CSV") from None
    if df.empty:
        raise FigureError(f"{path}: no data rows")
    missing = [c for c in REQUIRED[kind] if c not in df.columns]
    if missing:
        raise FigureError(f"{path}: missing columns {missing} "
                          f"(needed for {kind!r})")
    return df


def _merged(spec: FigureSpec) -> pd.DataFrame:
    return pd.concat([load_table(p, spec.kind) for p in spec.inputs],
                     ignore_index=True)


def _per_p(df: pd.DataFrame, col: str) -> pd.DataFrame:
    """Mean of ``col`` per (p, players), samples averaged out."""
    return (df.groupby(["p", "players"], sort=True)[col]
              .mean().reset_index())


def _log2_players_axis(ax) -> None:
    ax.set_xscale("log", base=2)
    ax.set_xlabel("players")
    ax.xaxis.set_major_formatter(plt.FuncFormatter(lambda v, _: f"{v:g}"))


# ---------------------------------------------------------------------------
# the five kinds


def _fig_welfare(spec: FigureSpec):
    df = _merged(spec)
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for p, sub in _per_p(df, "welfare_eq").groupby("p", sort=True):
        ax.plot(sub["players"], sub["welfare_eq"], marker="o",
                label=f"p = {p:g}")
    for p, sub in _per_p(df, "welfare_opt").groupby("p", sort=True):
        ax.plot(sub["players"], sub["welfare_opt"], linestyle="--",
                linewidth=1.0, color="gray",
                label="optimum" if p == df["p"].min() else None)
    _log2_players_axis(ax)
    ax.set_ylabel("social welfare")
    ax.legend()
    return fig


def _fig_strategy(spec: FigureSpec):
    df = _merged(spec)
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for p, sub in _per_p(df, "avg_coverage").groupby("p", sort=True):
        ax.plot(sub["players"], sub["avg_coverage"], marker="o",
                label=f"p = {p:g}")
    _log2_players_axis(ax)
    ax.set_ylabel("average coverage")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    return fig


def _fig_regret(spec: FigureSpec):
    # one best-so-far curve per trace file, named after the file
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for path in spec.inputs:
        df = load_table(path, spec.kind)
        ax.step(df["solves"], df["best"], where="post", label=path.stem)
    ax.set_xlabel("best-response solves")
    ax.set_ylabel("best regret so far")
    ax.set_ylim(bottom=0)
    ax.legend()
    return fig


def _fig_poa(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for path in spec.inputs:
        df = load_table(path, spec.kind)
        ax.plot(df["k"], df["poa"], marker=".", label=path.stem)
    ax.set_xlabel("targets per defender k")
    ax.set_ylabel("price of anarchy")
    ax.legend()
    return fig


def _fig_centrality(spec: FigureSpec):
    df = _merged(spec)
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for p, sub in df.groupby("p", sort=True):
        ax.scatter(sub["closeness"], sub["coverage"], s=12, alpha=0.5,
                   label=f"p = {p:g}")
    ax.set_xlabel("harmonic closeness")
    ax.set_ylabel("equilibrium coverage")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    return fig


_RENDERERS = {"welfare": _fig_welfare, "strategy": _fig_strategy,
              "regret": _fig_regret, "poa": _fig_poa,
              "centrality": _fig_centrality}


def render(spec: FigureSpec) -> Path:
    """Draw the figure and write it to ``spec.out``; returns the path."""
    fig = _RENDERERS[spec.kind](spec)
    try:
        spec.out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.out, dpi=_DPI)
    finally:
        plt.close(fig)
    return spec.out
