"""Dense bounded-variable two-phase tableau simplex.

Sized for the small node relaxations inside the best-response branch and
bound (tens of rows and columns), where a dense tableau with numpy rank-1
pivot updates beats the setup overhead of a general-purpose LP library.
Pricing is Dantzig's rule, switching to Bland's rule after a run of
degenerate pivots so cycling cannot occur.

Conventions: minimize (or maximize) c'x subject to A_ub x <= b_ub,
A_eq x == b_eq, lo <= x <= hi. Lower bounds must be finite; upper bounds
may be +inf. Fixed variables (lo == hi) are allowed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_RCOST_TOL = 1e-9      # reduced-cost optimality tolerance
_PIVOT_TOL = 1e-9      # smallest acceptable pivot magnitude
_GOOD_PIVOT = 1e-7     # preferred pivot magnitude; below this is likely noise
_FEAS_EPS = 1e-9       # Harris ratio-test bound relaxation
_DEGEN_RUN = 40        # degenerate pivots in a row before Bland takes over


@dataclass(frozen=True)
class LpSolution:
    status: str                  # "optimal" | "infeasible" | "unbounded" | "limit"
    x: np.ndarray | None
    objective: float | None
    iterations: int


class _Tableau:
    """Simplex state: T = B^-1 A over all columns, basic values tracked aside."""

    def __init__(self, A, b, lo, hi, slack_rows):
        m, n = A.shape
        x0 = lo.copy()
        resid = b - A @ x0

        self.art_of_row = np.full(m, -1, dtype=int)
        basis = np.empty(m, dtype=int)
        art_cols = []
        sign = np.ones(m)
        for i in range(m):
            if slack_rows[i] >= 0 and resid[i] >= 0.0:
                basis[i] = slack_rows[i]
            else:
                if resid[i] < 0.0:
                    sign[i] = -1.0
                col = n + len(art_cols)
                art_cols.append(i)
                self.art_of_row[i] = col
                basis[i] = col

        n_art = len(art_cols)
        A_all = np.zeros((m, n + n_art))
        A_all[:, :n] = A
        for j, i in enumerate(art_cols):
            A_all[i, n + j] = sign[i]

        self.n_struct = n
        self.n_art = n_art
        self.m = m
        self.A_orig = A_all.copy()
        self.b_orig = np.asarray(b, dtype=float).copy()
        self.lo = np.concatenate([lo, np.zeros(n_art)])
        self.hi = np.concatenate([hi, np.full(n_art, np.inf)])
        # all basic columns are +-unit vectors, so B^-1 is diag(d)
        d = np.ones(m)
        for i in range(m):
            if self.art_of_row[i] >= 0:
                d[i] = sign[i]
        self.T = d[:, None] * A_all
        self.vstat = np.zeros(n + n_art, dtype=np.int8)  # 0 lower, 1 upper, 2 basic
        self.vstat[basis] = 2
        self.basis = basis
        self.xB = d * resid
        self.iterations = 0

    def refactor(self) -> bool:
        """Rebuild T and the basic values from the current basis.

        Rank-1 pivot updates drift on ill-conditioned bases; a fresh
        factorization resets the accumulated error so the solve can
        continue instead of giving up.
        """
        B = self.A_orig[:, self.basis]
        try:
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(Binv)):
            return False
        self.T = Binv @ self.A_orig
        x_nb = np.where(self.vstat == 1, self.hi, self.lo)
        x_nb[self.basis] = 0.0
        self.xB = Binv @ (self.b_orig - self.A_orig @ x_nb)
        return True

    def values(self):
        x = np.where(self.vstat == 1, self.hi, self.lo)
        x[self.basis] = self.xB
        return x

    def run(self, cost, max_iter):
        """Minimize cost'x from the current basis. Returns a status string."""
        T, lo, hi = self.T, self.lo, self.hi
        movable = hi > lo
        bland = False
        degen_run = 0
        while self.iterations < max_iter:
            self.iterations += 1
            z = cost[self.basis] @ T
            r = cost - z
            at_lo = (self.vstat == 0) & movable & (r < -_RCOST_TOL)
            at_hi = (self.vstat == 1) & movable & (r > _RCOST_TOL)
            cand = at_lo | at_hi
            if not cand.any():
                return "optimal"
            if bland:
                e = int(np.flatnonzero(cand)[0])
            else:
                score = np.where(cand, np.abs(r), -np.inf)
                e = int(np.argmax(score))
            sigma = 1.0 if self.vstat[e] == 0 else -1.0

            col = T[:, e]
            denom = sigma * col
            lo_b = lo[self.basis]
            hi_b = hi[self.basis]
            # Harris two-pass ratio test: pass 1 bounds the step using limits
            # relaxed by _FEAS_EPS, pass 2 picks the largest pivot among rows
            # whose strict limit fits. Degenerate ties then resolve toward
            # well-scaled pivots instead of noise-sized ones that would make
            # the basis numerically singular.
            lim = np.full(self.m, np.inf)
            relaxed = np.full(self.m, np.inf)
            pos = denom > _PIVOT_TOL
            neg = denom < -_PIVOT_TOL
            slack_lo = self.xB - lo_b
            lim[pos] = slack_lo[pos] / denom[pos]
            relaxed[pos] = (slack_lo[pos] + _FEAS_EPS) / denom[pos]
            with np.errstate(invalid="ignore"):
                slack_hi = hi_b - self.xB
                lim[neg] = slack_hi[neg] / (-denom[neg])
                relaxed[neg] = (slack_hi[neg] + _FEAS_EPS) / (-denom[neg])
            inf_hi = neg & ~np.isfinite(hi_b)
            lim[inf_hi] = np.inf
            relaxed[inf_hi] = np.inf
            np.maximum(lim, 0.0, out=lim)  # float dust can push basics past a bound
            t_own = hi[e] - lo[e]

            t_cap = max(relaxed.min(), 0.0) if self.m else np.inf
            if not np.isfinite(min(t_cap, t_own)):
                return "unbounded"

            if t_own <= t_cap:
                # entering variable runs to its other bound; basis unchanged
                self.xB -= sigma * t_own * col
                self.vstat[e] ^= 1
                degen_run = 0
                bland = False
                continue

            if bland:
                # Bland needs the strict minimum-ratio tie set to terminate
                ties = np.flatnonzero(lim <= lim.min() + 1e-12)
                l = int(ties[np.argmin(self.basis[ties])])
            else:
                ties = np.flatnonzero(lim <= t_cap)
                l = int(ties[np.argmax(np.abs(denom[ties]))])
            t = lim[l]

            if t <= 1e-12:
                degen_run += 1
                if degen_run >= _DEGEN_RUN:
                    bland = True
            else:
                degen_run = 0
                bland = False

            leaving = self.basis[l]
            self.xB -= sigma * t * col
            enter_val = lo[e] + t if sigma > 0 else hi[e] - t
            self.vstat[leaving] = 0 if denom[l] > 0 else 1
            self.vstat[e] = 2
            self.basis[l] = e
            self.xB[l] = enter_val

            piv = T[l, e]
            T[l] /= piv
            other = T[:, e].copy()
            other[l] = 0.0
            T -= np.outer(other, T[l])
        return "limit"

    def run_dual(self, cost, max_iter, feas_tol):
        """Dual-simplex pass: restore primal feasibility after bound changes.

        Assumes the basis is (near) dual feasible for ``cost``; every pivot
        drives the most violated basic variable to its bound. Returns
        "feasible" once primal feasibility holds (the caller then finishes
        with the primal), "infeasible" when a violated row has no admissible
        entering column, or "limit".
        """
        if self.m == 0:
            return "feasible"
        T = self.T
        movable = self.hi > self.lo
        while self.iterations < max_iter:
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            below = lo_b - self.xB
            above = self.xB - hi_b
            above[~np.isfinite(hi_b)] = -np.inf
            l = int(np.argmax(np.maximum(below, above)))
            worst = max(below[l], above[l])
            if worst <= feas_tol:
                return "feasible"
            self.iterations += 1
            s = 1.0 if below[l] >= above[l] else -1.0
            row = T[l]
            r = cost - cost[self.basis] @ T
            cand = movable & (((self.vstat == 0) & (s * row < -_PIVOT_TOL))
                              | ((self.vstat == 1) & (s * row > _PIVOT_TOL)))
            if not cand.any():
                return "infeasible"
            # noise-sized pivots wreck the factorization; use them only
            # when no well-scaled column is admissible
            strong = cand & (np.abs(row) >= _GOOD_PIVOT)
            if strong.any():
                cand = strong
            idx = np.flatnonzero(cand)
            ratio = np.abs(r[idx]) / np.abs(row[idx])
            best = ratio.min()
            ties = idx[ratio <= best + 1e-12]
            e = int(ties[np.argmax(np.abs(row[ties]))])

            bnd = lo_b[l] if s > 0 else hi_b[l]
            theta = (self.xB[l] - bnd) / row[e]
            col = T[:, e].copy()
            self.xB -= theta * col
            enter_old = self.hi[e] if self.vstat[e] == 1 else self.lo[e]
            leaving = self.basis[l]
            self.vstat[leaving] = 0 if s > 0 else 1
            self.vstat[e] = 2
            self.basis[l] = e
            self.xB[l] = enter_old + theta

            piv = T[l, e]
            T[l] /= piv
            other = T[:, e].copy()
            other[l] = 0.0
            T -= np.outer(other, T[l])
        return "limit"


class ReusableLp:
    """Solve a sequence of LPs sharing A, b and c, differing only in bounds.

    Built for branch and bound: the first solve is a cold two-phase run;
    subsequent solves warm start from the previous optimal basis. Bound
    changes leave that basis dual feasible, so a dual-simplex pass restores
    primal feasibility and the primal finishes from there. Any numerical
    doubt (iteration blowout, residual drift) falls back to a cold solve.
    """

    def __init__(self, objective, *, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                 maximize=False):
        c = np.asarray(objective, dtype=float)
        n = c.size
        blocks, rhs, slack_rows = [], [], []
        n_slack = 0
        if A_ub is not None and len(A_ub):
            A_ub = np.asarray(A_ub, dtype=float).reshape(-1, n)
            blocks.append(A_ub)
            rhs.append(np.asarray(b_ub, dtype=float).ravel())
            slack_rows = [n + i for i in range(A_ub.shape[0])]
            n_slack = A_ub.shape[0]
        if A_eq is not None and len(A_eq):
            A_eq = np.asarray(A_eq, dtype=float).reshape(-1, n)
            blocks.append(A_eq)
            rhs.append(np.asarray(b_eq, dtype=float).ravel())
            slack_rows += [-1] * A_eq.shape[0]
        if blocks:
            A = np.vstack(blocks)
            self.b = np.concatenate(rhs)
        else:
            A = np.zeros((0, n))
            self.b = np.zeros(0)
        m = A.shape[0]
        self.A_full = np.hstack([A, np.zeros((m, n_slack))])
        for i, sc in enumerate(slack_rows):
            if sc >= 0:
                self.A_full[i, sc] = 1.0
        self.slack_rows = np.asarray(slack_rows, dtype=int)
        self.n = n
        self.m = m
        self.n_slack = n_slack
        self.sign = -1.0 if maximize else 1.0
        self.c = c
        self.c_full = np.concatenate([self.sign * c, np.zeros(n_slack)])
        self.max_iterations = 500 * (m + n + n_slack) + 2000
        self.iterations_total = 0
        self._tab = None
        self._c2 = None
        self._feas_tol = 1e-8 * (1.0 + (np.abs(self.b).max() if m else 0.0))

    def _expand_bounds(self, bounds):
        bnds = np.asarray(bounds, dtype=float).reshape(self.n, 2)
        lo = np.concatenate([bnds[:, 0], np.zeros(self.n_slack)])
        hi = np.concatenate([bnds[:, 1], np.full(self.n_slack, np.inf)])
        if not np.all(np.isfinite(lo)):
            raise ValueError("all lower bounds must be finite")
        if np.any(hi < lo):
            raise ValueError("upper bound below lower bound")
        return lo, hi

    def _finish(self, tab):
        x = tab.values()
        resid = np.abs(self.A_full @ x[:self.n + self.n_slack] - self.b)
        drift = resid.max() if self.m else 0.0
        out_lo = (tab.lo[:self.n] - x[:self.n]).max(initial=0.0)
        out_hi = np.max((x[:self.n] - tab.hi[:self.n])[np.isfinite(tab.hi[:self.n])],
                        initial=0.0)
        if drift > 100.0 * self._feas_tol or max(out_lo, out_hi) > 1e-7:
            return None
        xs = x[:self.n]
        return LpSolution("optimal", xs, float(self.c @ xs), tab.iterations)

    def _cold(self, lo, hi):
        self._tab = None
        tab = _Tableau(self.A_full, self.b, lo, hi, self.slack_rows)
        if tab.n_art:
            c1 = np.zeros(self.n + self.n_slack + tab.n_art)
            c1[self.n + self.n_slack:] = 1.0
            status = tab.run(c1, self.max_iterations)
            if status == "limit":
                return LpSolution("limit", None, None, tab.iterations)
            if float(c1 @ tab.values()) > self._feas_tol:
                return LpSolution("infeasible", None, None, tab.iterations)
            tab.hi[self.n + self.n_slack:] = 0.0
        c2 = np.concatenate([self.c_full, np.zeros(tab.n_art)])
        status = tab.run(c2, self.max_iterations)
        if status != "optimal":
            return LpSolution(status, None, None, tab.iterations)
        sol = self._finish(tab)
        for _ in range(3):
            if sol is not None:
                break
            # drifted: refactorize, restore feasibility, reoptimize
            if not tab.refactor():
                break
            if tab.run_dual(c2, self.max_iterations, self._feas_tol) != "feasible":
                break
            status = tab.run(c2, self.max_iterations)
            if status != "optimal":
                return LpSolution(status, None, None, tab.iterations)
            sol = self._finish(tab)
        if sol is None:
            return LpSolution("limit", None, None, tab.iterations)
        self._tab = tab
        self._c2 = c2
        return sol

    def solve(self, bounds) -> LpSolution:
        lo, hi = self._expand_bounds(bounds)
        tab = self._tab
        if tab is None:
            sol = self._cold(lo, hi)
            self.iterations_total += sol.iterations
            return sol
        base = tab.iterations
        nn = self.n + self.n_slack
        # shift basics for every nonbasic whose active bound value moved
        old_nb = np.where(tab.vstat[:nn] == 1, tab.hi[:nn], tab.lo[:nn])
        tab.lo[:nn] = lo
        tab.hi[:nn] = hi
        flip = (tab.vstat[:nn] == 1) & ~np.isfinite(hi)
        tab.vstat[:nn][flip] = 0
        new_nb = np.where(tab.vstat[:nn] == 1, tab.hi[:nn], tab.lo[:nn])
        delta = new_nb - old_nb
        delta[tab.vstat[:nn] == 2] = 0.0
        moved = np.flatnonzero(delta)
        if moved.size:
            tab.xB -= tab.T[:, moved] @ delta[moved]
        status = tab.run_dual(self._c2, self.max_iterations, self._feas_tol)
        if status == "feasible":
            status = tab.run(self._c2, self.max_iterations)
            if status == "optimal":
                sol = self._finish(tab)
                if sol is not None:
                    self.iterations_total += tab.iterations - base
                    return LpSolution("optimal", sol.x, sol.objective,
                                      tab.iterations - base)
        # anything else, including an infeasibility claim, gets cold
        # confirmation: a stale basis must never prune a feasible node
        self.iterations_total += tab.iterations - base
        sol = self._cold(lo, hi)
        self.iterations_total += sol.iterations
        return sol


def solve_lp(objective, *, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
             bounds, maximize=False, max_iterations=None) -> LpSolution:
    """Solve a bounded linear program; see the module docstring for the form."""
    c = np.asarray(objective, dtype=float)
    n = c.size
    bnds = np.asarray(bounds, dtype=float).reshape(n, 2)
    lo, hi = bnds[:, 0].copy(), bnds[:, 1].copy()
    if not np.all(np.isfinite(lo)):
        raise ValueError("all lower bounds must be finite")
    if np.any(hi < lo):
        raise ValueError("upper bound below lower bound")

    blocks, rhs, slack_rows = [], [], []
    n_slack = 0
    if A_ub is not None and len(A_ub):
        A_ub = np.asarray(A_ub, dtype=float).reshape(-1, n)
        b_ub = np.asarray(b_ub, dtype=float).ravel()
        blocks.append(A_ub)
        rhs.append(b_ub)
        slack_rows = [n + i for i in range(A_ub.shape[0])]
        n_slack = A_ub.shape[0]
    if A_eq is not None and len(A_eq):
        A_eq = np.asarray(A_eq, dtype=float).reshape(-1, n)
        b_eq = np.asarray(b_eq, dtype=float).ravel()
        blocks.append(A_eq)
        rhs.append(b_eq)
        slack_rows += [-1] * A_eq.shape[0]

    if blocks:
        A = np.vstack(blocks)
        b = np.concatenate(rhs)
    else:
        A = np.zeros((0, n))
        b = np.zeros(0)
    m = A.shape[0]
    A_full = np.hstack([A, np.zeros((m, n_slack))])
    for i, sc in enumerate(slack_rows):
        if sc >= 0:
            A_full[i, sc] = 1.0
    lo_full = np.concatenate([lo, np.zeros(n_slack)])
    hi_full = np.concatenate([hi, np.full(n_slack, np.inf)])

    sign = -1.0 if maximize else 1.0
    c_full = np.concatenate([sign * c, np.zeros(n_slack)])
    if max_iterations is None:
        max_iterations = 500 * (m + n + n_slack) + 2000

    tab = _Tableau(A_full, b, lo_full, hi_full, np.asarray(slack_rows, dtype=int))

    if tab.n_art:
        c1 = np.zeros(n + n_slack + tab.n_art)
        c1[n + n_slack:] = 1.0
        status = tab.run(c1, max_iterations)
        if status == "limit":
            return LpSolution("limit", None, None, tab.iterations)
        feas_tol = 1e-8 * (1.0 + (np.abs(b).max() if m else 0.0))
        if float(c1 @ tab.values()) > feas_tol:
            return LpSolution("infeasible", None, None, tab.iterations)
        # artificials are frozen at zero for phase 2
        tab.hi[n + n_slack:] = 0.0

    c2 = np.concatenate([c_full, np.zeros(tab.n_art)])
    status = tab.run(c2, max_iterations)
    if status != "optimal":
        return LpSolution(status, None, None, tab.iterations)
    x = tab.values()[:n]
    return LpSolution("optimal", x, float(c @ x), tab.iterations)
