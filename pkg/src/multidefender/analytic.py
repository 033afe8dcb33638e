"""Closed-form equilibrium analysis of the homogeneous independent models.

Three nested models are covered, all with n symmetric defenders and unit
defense cost c per target:

* baseline: one target per defender worth v (lost if attacked uncovered),
* multitarget: k identical such targets per defender,
* general: per-target outcome utilities uc / uu / omega for
  covered-attacked / uncovered-attacked / not-attacked (omega >= uc >= uu).

The attacker strikes the least-covered targets, uniformly at random among
ties. At a symmetric profile every defender covers every target with the same
probability q, which makes unilateral deviations one-dimensional: a defender
either raises all her targets (the attack moves elsewhere) or lowers them
(the attack lands on her for sure). ``symmetric_regret_oracle`` evaluates
those deviations on an explicit grid and is deliberately independent of the
closed forms in the solver functions so each can check the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .game import epsilon_poa, WelfareSignError
from .games import IndependentParams

DEFAULT_GRID_STEP = 1e-4


@dataclass(frozen=True)
class AnalyticResult:
    """Equilibrium summary of one parameterization.

    ``coverage`` is the symmetric per-target cover probability q* (1 when an
    exact equilibrium exists, the best-approximation point otherwise) and
    ``epsilon`` the corresponding minimal unilateral gain. ``poa`` compares
    equilibrium and optimal welfare (None when the ratio is undefined, e.g.
    zero welfare); ``poa_kind`` records whether it is an exact or an
    epsilon-approximation ratio. The ``*_limit_*`` fields are formula limits
    of the family: epsilon and the poa branch as k grows without bound, and
    the poa branch as n grows without bound (None when divergent/undefined).
    """

    model: str
    ne_exists: bool
    coverage: float
    epsilon: float
    sw_eq: float
    sw_opt: float
    poa: float | None
    poa_kind: str
    epsilon_limit_k: float | None = None
    poa_limit_n: float | None = None
    poa_limit_k: float | None = None


def _symmetric_utility(p: IndependentParams, q: float) -> float:
    """Per-defender utility when everyone covers every target with prob q."""
    uc, uu, omega = p.outcome_utils()
    n, k, c = p.n, p.k, p.c
    return ((uc - uu - n * k * c) * q + uu + (n * k - 1) * omega) / n


def _deviation_up(p: IndependentParams, q_to: float) -> float:
    """Deviator's utility after raising all her targets above everyone else.

    Her targets are then strictly better covered than the rest, so the attack
    falls on another defender (requires n >= 2) and she keeps omega per
    target minus coverage cost.
    """
    _, _, omega = p.outcome_utils()
    return p.k * (omega - q_to * p.c)


def _deviation_down(p: IndependentParams, q_to: float) -> float:
    """Deviator's utility after lowering all her targets below everyone else.

    The attack now lands on one of her k targets, uniformly, with the rest of
    hers yielding omega each.
    """
    uc, uu, omega = p.outcome_utils()
    return (uc - uu - p.k * p.c) * q_to + uu + (p.k - 1) * omega


def symmetric_regret_oracle(p: IndependentParams, q: float, grid_step: float = DEFAULT_GRID_STEP) -> float:
    """Best deviation gain from the symmetric profile q, over a coverage grid.

    Candidate deviations are q+step, q+2*step, ... up to 1 (raising all the
    deviator's targets) and q-step, ... down to the lowest reachable grid
    point (lowering them). Both deviation utilities are linear in the target
    coverage, so the grid maximum is attained at a grid endpoint; only the
    endpoints are evaluated, which a brute-force test confirms is exact.
    Returns 0 when no deviation gains.
    """
    if not (0.0 < grid_step <= 0.01):
        raise ValueError("grid_step must be in (0, 0.01]")
    if not (0.0 <= q <= 1.0):
        raise ValueError("q must lie in [0, 1]")
    if p.n < 2:
        raise ValueError("deviation analysis needs at least two defenders")
    base = _symmetric_utility(p, q)
    best = 0.0
    up_steps = math.floor((1.0 - q) / grid_step + 1e-9)
    if up_steps >= 1:
        for q_to in (q + grid_step, q + up_steps * grid_step):
            best = max(best, _deviation_up(p, q_to) - base)
    down_steps = math.floor(q / grid_step + 1e-9)
    if down_steps >= 1:
        for q_to in (q - grid_step, q - down_steps * grid_step):
            best = max(best, _deviation_down(p, q_to) - base)
    return best


def symmetric_regret_curve(p: IndependentParams, q_grid: np.ndarray,
                           grid_step: float = DEFAULT_GRID_STEP) -> np.ndarray:
    """Vectorized ``symmetric_regret_oracle`` over an array of q values."""
    if not (0.0 < grid_step <= 0.01):
        raise ValueError("grid_step must be in (0, 0.01]")
    if p.n < 2:
        raise ValueError("deviation analysis needs at least two defenders")
    q = np.asarray(q_grid, dtype=float)
    if q.size and (q.min() < 0.0 or q.max() > 1.0):
        raise ValueError("q grid must lie in [0, 1]")
    uc, uu, omega = p.outcome_utils()
    n, k, c = p.n, p.k, p.c
    base = ((uc - uu - n * k * c) * q + uu + (n * k - 1) * omega) / n
    out = np.zeros_like(q)
    up_steps = np.floor((1.0 - q) / grid_step + 1e-9)
    for q_to in (q + grid_step, q + up_steps * grid_step):
        gain = np.where(up_steps >= 1, k * (omega - q_to * c) - base, 0.0)
        np.maximum(out, gain, out=out)
    down_steps = np.floor(q / grid_step + 1e-9)
    for q_to in (q - grid_step, q - down_steps * grid_step):
        gain = np.where(down_steps >= 1,
                        (uc - uu - k * c) * q_to + uu + (k - 1) * omega - base, 0.0)
        np.maximum(out, gain, out=out)
    return out


def _safe_poa(sw_opt: float, sw_eq: float) -> float | None:
    try:
        return epsilon_poa(sw_opt, sw_eq)
    except WelfareSignError:
        return None


def baseline_solve(v: float, c: float, n: int) -> AnalyticResult:
    """Equilibrium analysis of the one-target-per-defender model."""
    p = IndependentParams.baseline(v=v, c=c, n=n)
    v, c, n = float(v), float(c), int(n)
    if v >= c:
        ne, coverage, eps = True, 1.0, 0.0
        sw_eq = -(n * c)
    else:
        ne, coverage = False, v / c
        eps = v * (c - v) / (c * n)
        sw_eq = (v - n * c) * v / c - v
    sw_opt = -(n * c) if v >= n * c else -v
    return AnalyticResult(
        model=p.model, ne_exists=ne, coverage=coverage, epsilon=eps,
        sw_eq=sw_eq, sw_opt=sw_opt, poa=_safe_poa(sw_opt, sw_eq),
        poa_kind="exact" if ne else "epsilon",
        epsilon_limit_k=v / n,
        poa_limit_n=None,
        poa_limit_k=n + 1.0 if v > 0 else None,
    )


def multitarget_solve(v: float, c: float, n: int, k: int) -> AnalyticResult:
    """Equilibrium analysis of the k-targets-per-defender model."""
    p = IndependentParams.multitarget(v=v, c=c, n=n, k=k)
    v, c, n, k = float(v), float(c), int(n), int(k)
    if v >= k * c:
        ne, coverage, eps = True, 1.0, 0.0
        sw_eq = -(n * k * c)
    else:
        ne, coverage = False, v / (k * c)
        eps = v * (k * c - v) / (c * n * k)
        sw_eq = (v - n * k * c) * v / (k * c) - v
    sw_opt = -(n * k * c) if v >= n * k * c else -v
    return AnalyticResult(
        model=p.model, ne_exists=ne, coverage=coverage, epsilon=eps,
        sw_eq=sw_eq, sw_opt=sw_opt, poa=_safe_poa(sw_opt, sw_eq),
        poa_kind="exact" if ne else "epsilon",
        epsilon_limit_k=v / n,
        poa_limit_n=None,
        poa_limit_k=n + 1.0 if v > 0 else None,
    )


def general_solve(c: float, n: int, k: int, uc: float, uu: float, omega: float) -> AnalyticResult:
    """Equilibrium analysis of the general outcome-utility model.

    Raises ValueError in the no-equilibrium regime when the best symmetric
    approximation point (omega - uu)/(kc) exceeds 1; the closed forms assume
    it is a feasible coverage probability, and silently clamping would
    misreport epsilon.
    """
    p = IndependentParams.general(c=c, n=n, k=k, uc=uc, uu=uu, omega=omega)
    c, n, k = float(c), int(n), int(k)
    uc, uu, omega = float(uc), float(uu), float(omega)
    ne = (uc - uu) >= k * c - (n - 1) * (omega - uc) / n
    if ne:
        coverage, eps = 1.0, 0.0
        sw_eq = (uc - n * k * c) + (n * k - 1) * omega
    else:
        coverage = (omega - uu) / (k * c)
        if coverage > 1.0 + 1e-12:
            raise ValueError(
                f"best symmetric coverage (omega-uu)/(kc) = {coverage:.6g} exceeds 1; "
                "this parameter regime is outside the closed-form analysis")
        eps = (omega - uu) * (k * c - uc + uu) / (c * n * k)
        sw_eq = (uc - uu - n * k * c) * (omega - uu) / (k * c) + uu + (n * k - 1) * omega
    sw_opt = (uc - n * k * c) + (n * k - 1) * omega if uc - uu >= n * k * c \
        else uu + (n * k - 1) * omega
    if omega < 0:
        poa_limit_n = 1.0 - c / omega if ne else 1.0 + (uu - omega) / (k * omega)
        poa_limit_k = 1.0
    elif omega == 0 and uu < 0:
        poa_limit_n, poa_limit_k = None, n + 1.0
    else:
        poa_limit_n, poa_limit_k = None, None
    return AnalyticResult(
        model=p.model, ne_exists=ne, coverage=coverage, epsilon=eps,
        sw_eq=sw_eq, sw_opt=sw_opt, poa=_safe_poa(sw_opt, sw_eq),
        poa_kind="exact" if ne else "epsilon",
        epsilon_limit_k=(omega - uu) / n,
        poa_limit_n=poa_limit_n,
        poa_limit_k=poa_limit_k,
    )


def solve(p: IndependentParams) -> AnalyticResult:
    """Dispatch to the model-specific solver."""
    if p.model == "baseline":
        return baseline_solve(p.v, p.c, p.n)
    if p.model == "multitarget":
        return multitarget_solve(p.v, p.c, p.n, p.k)
    return general_solve(p.c, p.n, p.k, p.uc, p.uu, p.omega)
