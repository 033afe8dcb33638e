"""Canonical game constructions: analytic-model encodings and random instances."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .game import InterdependentGame

MODELS = ("baseline", "multitarget", "general")


@dataclass(frozen=True)
class IndependentParams:
    """Parameters of the homogeneous independent-target models.

    ``baseline`` is one target per defender with value v and unit defense cost
    c. ``multitarget`` gives each defender k identical such targets.
    ``general`` replaces the value with three per-target outcome utilities:
    uc when the attacked target is covered, uu when uncovered, and omega for
    each target that is not attacked (omega >= uc >= uu).
    """

    model: str
    n: int
    k: int = 1
    v: float | None = None
    c: float = 1.0
    uc: float | None = None
    uu: float | None = None
    omega: float | None = None

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}, expected one of {MODELS}")
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ValueError("n must be an integer >= 1")
        if not (isinstance(self.k, int) and self.k >= 1):
            raise ValueError("k must be an integer >= 1")
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValueError("c must be finite and > 0")
        if self.model == "baseline" and self.k != 1:
            raise ValueError("baseline model has exactly one target per defender")
        if self.model == "general":
            if self.uc is None or self.uu is None or self.omega is None:
                raise ValueError("general model needs uc, uu and omega")
            for name in ("uc", "uu", "omega"):
                if not math.isfinite(getattr(self, name)):
                    raise ValueError(f"{name} must be finite")
            if not (self.omega >= self.uc >= self.uu):
                raise ValueError("general model requires omega >= uc >= uu")
        else:
            if self.v is None or not math.isfinite(self.v) or self.v < 0:
                raise ValueError("v must be finite and >= 0")

    @classmethod
    def baseline(cls, v: float, c: float, n: int) -> "IndependentParams":
        return cls(model="baseline", n=n, k=1, v=float(v), c=float(c))

    @classmethod
    def multitarget(cls, v: float, c: float, n: int, k: int) -> "IndependentParams":
        return cls(model="multitarget", n=n, k=k, v=float(v), c=float(c))

    @classmethod
    def general(cls, c: float, n: int, k: int, uc: float, uu: float,
                omega: float) -> "IndependentParams":
        return cls(model="general", n=n, k=k, c=float(c),
                   uc=float(uc), uu=float(uu), omega=float(omega))

    def outcome_utils(self) -> tuple[float, float, float]:
        """(covered, uncovered, unattacked) utilities of a single target."""
        if self.model == "general":
            return float(self.uc), float(self.uu), float(self.omega)
        return 0.0, -float(self.v), 0.0


def encode_independent(params: IndependentParams) -> InterdependentGame:
    """Represent a homogeneous independent-target model as an explicit game.

    Every target gets the two configurations ("cover", "pass") with costs
    (c, 0). The attacker value is 1 for an uncovered target and 0 for a
    covered one, so the attack always lands on the least-covered targets,
    which is all the analytic models assume about the attacker. A defender's
    utility when target j is struck folds in the omega payoff of all her
    targets that were not attacked.
    """
    uc, uu, omega = params.outcome_utils()
    defenders = tuple(f"d{i}" for i in range(params.n))
    targets, owner = [], {}
    for i in range(params.n):
        for j in range(params.k):
            t = f"t{i}_{j}"
            targets.append(t)
            owner[t] = f"d{i}"
    configs = {t: ("cover", "pass") for t in targets}
    cost = {t: {"cover": params.c, "pass": 0.0} for t in targets}
    attacker_val = {t: {"cover": 0.0, "pass": 1.0} for t in targets}
    defender_util = {}
    for i, d in enumerate(defenders):
        table = {}
        for t in targets:
            if owner[t] == d:
                base = (params.k - 1) * omega
                table[t] = {"cover": uc + base, "pass": uu + base}
            else:
                table[t] = {"cover": params.k * omega, "pass": params.k * omega}
        defender_util[d] = table
    return InterdependentGame(defenders=defenders, targets=tuple(targets), owner=owner,
                              configs=configs, cost=cost, defender_util=defender_util,
                              attacker_val=attacker_val)


def standoff_game(cost: float = 0.01) -> InterdependentGame:
    """Two defenders, one unit-value target each, cheap defense.

    The leader-follower best response here is pathological: whoever is less
    covered is attacked, so iterated responses escalate coverage. Used as a
    small worked example throughout the tests.
    """
    return encode_independent(IndependentParams.baseline(v=1.0, c=cost, n=2))


def random_independent_game(n_defenders: int, n_targets: int, cost: float = 0.2,
                            seed: int | np.random.Generator = 0,
                            cross_values: bool = True) -> InterdependentGame:
    """Independent-target game with uniform random values.

    Targets are split evenly between defenders. With ``cross_values`` every
    defender draws a value for every target (so an attack elsewhere can still
    hurt her); otherwise only owners value their own targets. Defense fully
    protects: a covered target yields 0 to everyone and 0 to the attacker,
    an uncovered one costs each defender her drawn value and offers the
    attacker the summed values.
    """
    if n_targets % n_defenders != 0:
        raise ValueError("n_targets must divide evenly between defenders")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    per = n_targets // n_defenders
    defenders = tuple(f"d{i}" for i in range(n_defenders))
    targets = tuple(f"t{j}" for j in range(n_targets))
    owner = {f"t{j}": f"d{j // per}" for j in range(n_targets)}
    values = rng.uniform(0.0, 1.0, size=(n_defenders, n_targets))
    if not cross_values:
        mask = np.zeros_like(values)
        for j in range(n_targets):
            mask[j // per, j] = 1.0
        values = values * mask
    configs = {t: ("cover", "pass") for t in targets}
    cost_tbl = {t: {"cover": float(cost), "pass": 0.0} for t in targets}
    defender_util = {
        d: {t: {"cover": 0.0, "pass": -float(values[i, j])} for j, t in enumerate(targets)}
        for i, d in enumerate(defenders)
    }
    attacker_val = {t: {"cover": 0.0, "pass": float(values[:, j].sum())}
                    for j, t in enumerate(targets)}
    return InterdependentGame(defenders=defenders, targets=targets, owner=owner,
                              configs=configs, cost=cost_tbl, defender_util=defender_util,
                              attacker_val=attacker_val)
