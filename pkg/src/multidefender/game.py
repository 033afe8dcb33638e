"""Core types and evaluation primitives for multidefender security games.

A game consists of targets, each controlled by exactly one defender, with a
finite set of security configurations per target. Defenders commit to mixed
configuration choices; a strategic attacker observes the joint coverage and
attacks one target. Ties in the attacker's expected value are broken uniformly
over the argmax set (the average-case attack response), which keeps every
defender's payoff well defined when several defenders shape the attacker's
choice simultaneously.

Conventions used throughout:

* configuration costs are charged in expectation whether or not the attack
  lands on the paying defender's targets,
* float tie comparisons use an explicit tolerance (default 1e-6 for attacker
  ties, 1e-9 for generic float checks),
* all numeric inputs are validated eagerly and NaN/inf are rejected.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

TIE_TOL = 1e-6
FLOAT_TOL = 1e-9

_NATURAL_RE = re.compile(r"(\d+)")


class WelfareSignError(ValueError):
    """Raised when a price-of-anarchy ratio is not sign-consistent."""


def _natural_key(name: str) -> tuple:
    """Sort key that orders embedded integers numerically (t2 before t10)."""
    return tuple(int(p) if p.isdigit() else p for p in _NATURAL_RE.split(name))


def _check_finite(value: float, what: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{what} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class InterdependentGame:
    """A multidefender game over configurable targets.

    Fields:
        defenders: player identifiers, canonically ordered.
        targets: target identifiers, canonically ordered.
        owner: target -> controlling defender.
        configs: target -> ordered tuple of configuration names.
        cost: target -> config -> nonnegative expected cost of choosing it.
        defender_util: defender -> target -> config -> utility to that
            defender when the attacker strikes that target in that config.
        attacker_val: target -> config -> attacker's value for striking the
            target in that config.
    """

    defenders: tuple[str, ...]
    targets: tuple[str, ...]
    owner: Mapping[str, str]
    configs: Mapping[str, tuple[str, ...]]
    cost: Mapping[str, Mapping[str, float]]
    defender_util: Mapping[str, Mapping[str, Mapping[str, float]]]
    attacker_val: Mapping[str, Mapping[str, float]]
    owned: Mapping[str, tuple[str, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.targets:
            raise ValueError("game needs at least one target")
        if not self.defenders:
            raise ValueError("game needs at least one defender")
        object.__setattr__(self, "defenders", tuple(sorted(self.defenders, key=_natural_key)))
        object.__setattr__(self, "targets", tuple(sorted(self.targets, key=_natural_key)))
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("duplicate target names")
        if len(set(self.defenders)) != len(self.defenders):
            raise ValueError("duplicate defender names")
        if set(self.owner) != set(self.targets):
            raise ValueError("owner map must cover exactly the targets")
        for j, d in self.owner.items():
            if d not in set(self.defenders):
                raise ValueError(f"target {j} owned by unknown defender {d}")
        configs = {}
        for j in self.targets:
            if j not in self.configs or not self.configs[j]:
                raise ValueError(f"target {j} needs a nonempty configuration set")
            names = tuple(self.configs[j])
            if len(set(names)) != len(names):
                raise ValueError(f"duplicate configuration names on target {j}")
            configs[j] = names
        object.__setattr__(self, "configs", configs)
        try:
            for j in self.targets:
                for o in configs[j]:
                    c = _check_finite(self.cost[j][o], f"cost[{j}][{o}]")
                    if c < 0:
                        raise ValueError(f"cost[{j}][{o}] must be nonnegative")
                    _check_finite(self.attacker_val[j][o], f"attacker_val[{j}][{o}]")
                    for i in self.defenders:
                        _check_finite(self.defender_util[i][j][o], f"defender_util[{i}][{j}][{o}]")
        except KeyError as exc:
            raise ValueError(f"incomplete game tables: missing entry {exc}") from None
        owned: dict[str, list[str]] = {i: [] for i in self.defenders}
        for j in self.targets:
            owned[self.owner[j]].append(j)
        object.__setattr__(self, "owned", {i: tuple(js) for i, js in owned.items()})

    def config_index(self, target: str, config: str) -> int:
        try:
            return self.configs[target].index(config)
        except (KeyError, ValueError):
            raise ValueError(f"unknown target/config pair ({target}, {config})") from None


@dataclass(frozen=True)
class CoverageProfile:
    """Mixed configuration choice per target.

    ``dist[j]`` is a probability vector aligned with ``game.configs[j]``.
    Construct with :meth:`from_map` or the helpers below so alignment with a
    game's configuration order is explicit.
    """

    dist: Mapping[str, tuple[float, ...]]

    def __post_init__(self) -> None:
        clean: dict[str, tuple[float, ...]] = {}
        for j, row in self.dist.items():
            row = tuple(_check_finite(x, f"probability for {j}") for x in row)
            if any(x < -FLOAT_TOL or x > 1 + FLOAT_TOL for x in row):
                raise ValueError(f"probabilities for {j} outside [0, 1]: {row}")
            if abs(sum(row) - 1.0) > 1e-9:
                raise ValueError(f"distribution for {j} sums to {sum(row)!r}, not 1")
            clean[j] = row
        object.__setattr__(self, "dist", clean)

    @classmethod
    def from_map(cls, game: InterdependentGame, q: Mapping[str, Mapping[str, float]]) -> "CoverageProfile":
        rows = {}
        for j in game.targets:
            if j not in q:
                raise ValueError(f"profile missing target {j}")
            row = q[j]
            unknown = set(row) - set(game.configs[j])
            if unknown:
                raise ValueError(f"unknown configs for {j}: {sorted(unknown)}")
            rows[j] = tuple(float(row.get(o, 0.0)) for o in game.configs[j])
        return cls(rows)

    @classmethod
    def pure(cls, game: InterdependentGame, choice: Mapping[str, str]) -> "CoverageProfile":
        rows = {}
        for j in game.targets:
            k = game.config_index(j, choice[j])
            rows[j] = tuple(1.0 if i == k else 0.0 for i in range(len(game.configs[j])))
        return cls(rows)

    def replace(self, target: str, row: Sequence[float]) -> "CoverageProfile":
        new = dict(self.dist)
        new[target] = tuple(float(x) for x in row)
        return CoverageProfile(new)

    def q(self, game: InterdependentGame, target: str, config: str) -> float:
        return self.dist[target][game.config_index(target, config)]


@dataclass(frozen=True)
class AttackDistribution:
    """Attacker's mixed response: uniform over the tied-best targets."""

    p: Mapping[str, float]
    support: tuple[str, ...]
    tie_tol: float

    def __post_init__(self) -> None:
        total = sum(self.p.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"attack distribution sums to {total!r}")


@dataclass(frozen=True)
class EquilibriumReport:
    """Evaluation of a profile: attack response, payoffs and welfare."""

    profile: CoverageProfile
    attack: AttackDistribution
    utilities: Mapping[str, float]
    welfare: float
    epsilon: float | None = None
    poa: float | None = None


def validate_profile(game: InterdependentGame, profile: CoverageProfile) -> None:
    """Check that a profile covers exactly the game's targets with aligned rows."""
    if set(profile.dist) != set(game.targets):
        missing = set(game.targets) - set(profile.dist)
        extra = set(profile.dist) - set(game.targets)
        raise ValueError(f"profile target mismatch (missing {sorted(missing)}, extra {sorted(extra)})")
    for j in game.targets:
        if len(profile.dist[j]) != len(game.configs[j]):
            raise ValueError(f"profile row for {j} has {len(profile.dist[j])} entries, "
                             f"expected {len(game.configs[j])}")


def attacker_value(game: InterdependentGame, profile: CoverageProfile, target: str) -> float:
    """Expected value to the attacker of striking ``target`` under ``profile``."""
    if target not in game.attacker_val:
        raise ValueError(f"unknown target {target}")
    vals = game.attacker_val[target]
    row = profile.dist[target]
    return sum(q * vals[o] for q, o in zip(row, game.configs[target]))


def attacker_values(game: InterdependentGame, profile: CoverageProfile) -> dict[str, float]:
    return {j: attacker_value(game, profile, j) for j in game.targets}


def ase_attack(game: InterdependentGame, profile: CoverageProfile, tol: float = TIE_TOL) -> AttackDistribution:
    """Average-case attack response: uniform over targets within ``tol`` of the max value."""
    if tol < 0:
        raise ValueError("tie tolerance must be nonnegative")
    validate_profile(game, profile)
    vals = attacker_values(game, profile)
    best = max(vals.values())
    support = tuple(j for j in game.targets if vals[j] >= best - tol)
    share = 1.0 / len(support)
    p = {j: (share if j in set(support) else 0.0) for j in game.targets}
    return AttackDistribution(p=p, support=support, tie_tol=tol)


def defender_utilities(game: InterdependentGame, profile: CoverageProfile,
                       attack: AttackDistribution) -> dict[str, float]:
    """Expected utility per defender; configuration costs are paid in expectation."""
    validate_profile(game, profile)
    out = {}
    for i in game.defenders:
        u = 0.0
        table = game.defender_util[i]
        for j in attack.support:
            pj = attack.p[j]
            row = profile.dist[j]
            u += pj * sum(q * table[j][o] for q, o in zip(row, game.configs[j]))
        for j in game.owned[i]:
            row = profile.dist[j]
            u -= sum(q * game.cost[j][o] for q, o in zip(row, game.configs[j]))
        out[i] = u
    return out


def social_welfare(utilities: Mapping[str, float] | Iterable[float]) -> float:
    """Utilitarian welfare: the sum of defender utilities."""
    if isinstance(utilities, Mapping):
        return float(sum(utilities.values()))
    return float(sum(utilities))


def epsilon_poa(sw_opt: float, sw_eq: float) -> float:
    """Price-of-anarchy ratio with the reciprocal convention for losses.

    For positive welfares the ratio is opt/eq; when both welfares are negative
    (pure-loss games) the ratio is eq/opt so that the result is always >= 1
    when the optimum weakly dominates. Zero or mixed-sign welfare has no
    meaningful ratio and raises :class:`WelfareSignError`.
    """
    sw_opt = _check_finite(sw_opt, "sw_opt")
    sw_eq = _check_finite(sw_eq, "sw_eq")
    if sw_opt > 0 and sw_eq > 0:
        return sw_opt / sw_eq
    if sw_opt < 0 and sw_eq < 0:
        return sw_eq / sw_opt
    raise WelfareSignError(
        f"price of anarchy needs nonzero same-sign welfares, got opt={sw_opt!r} eq={sw_eq!r}")


def regret(game: InterdependentGame, profile: CoverageProfile, tol: float | None = None,
           br_solver: Callable | None = None, **br_kwargs) -> float:
    """Largest unilateral best-response gain over all defenders, floored at 0.

    ``tol`` is the attacker tie tolerance used to evaluate the current
    profile's utilities; it defaults to the best-response solver's stability
    window so both sides of the comparison use the same attack semantics.
    """
    if br_solver is None:
        from . import milp
        br_solver = milp.best_response
        if tol is None:
            tol = milp.resolve_stability(game, br_kwargs.get("delta"), br_kwargs.get("m_big"))[0]
    if tol is None:
        tol = TIE_TOL
    attack = ase_attack(game, profile, tol=tol)
    current = defender_utilities(game, profile, attack)
    worst = 0.0
    for i in game.defenders:
        br = br_solver(game, i, profile, **br_kwargs)
        worst = max(worst, br.utility - current[i])
    return worst


def evaluate_profile(game: InterdependentGame, profile: CoverageProfile, tol: float = TIE_TOL,
                     epsilon: float | None = None) -> EquilibriumReport:
    """Bundle the attack response, utilities and welfare of a profile."""
    attack = ase_attack(game, profile, tol=tol)
    utilities = defender_utilities(game, profile, attack)
    return EquilibriumReport(profile=profile, attack=attack, utilities=utilities,
                             welfare=social_welfare(utilities), epsilon=epsilon)


# ---------------------------------------------------------------------------
# Serialization. The on-disk dialect is plain JSON with six sections; keys are
# written sorted and floats use their shortest round-trip repr, so saving is
# byte-stable.

def game_to_dict(game: InterdependentGame) -> dict:
    return {
        "targets": list(game.targets),
        "owners": {j: game.owner[j] for j in game.targets},
        "configs": {j: list(game.configs[j]) for j in game.targets},
        "costs": {j: {o: game.cost[j][o] for o in game.configs[j]} for j in game.targets},
        "defender_utils": {
            i: {j: {o: game.defender_util[i][j][o] for o in game.configs[j]}
                for j in game.targets}
            for i in game.defenders
        },
        "attacker_vals": {j: {o: game.attacker_val[j][o] for o in game.configs[j]}
                          for j in game.targets},
    }


def game_from_dict(data: Mapping) -> InterdependentGame:
    required = {"targets", "owners", "configs", "costs", "defender_utils", "attacker_vals"}
    missing = required - set(data)
    if missing:
        raise ValueError(f"game file missing sections: {sorted(missing)}")
    defenders = set(data["defender_utils"]) | set(data["owners"].values())
    return InterdependentGame(
        defenders=tuple(defenders),
        targets=tuple(data["targets"]),
        owner=dict(data["owners"]),
        configs={j: tuple(os) for j, os in data["configs"].items()},
        cost={j: dict(cs) for j, cs in data["costs"].items()},
        defender_util={i: {j: dict(os) for j, os in tbl.items()}
                       for i, tbl in data["defender_utils"].items()},
        attacker_val={j: dict(os) for j, os in data["attacker_vals"].items()},
    )


def save_game(game: InterdependentGame, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(game_to_dict(game), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_game(path: str) -> InterdependentGame:
    with open(path, encoding="utf-8") as fh:
        return game_from_dict(json.load(fh))
