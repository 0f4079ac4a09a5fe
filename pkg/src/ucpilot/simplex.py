"""Bounded-variable revised primal simplex.

Equality form with one slack per row plus one artificial per row; the basis
is factorized with sparse LU and kept current between refactorizations by
product-form eta updates.

Cold solves run a textbook artificial-variable phase 1 (fixed objective, so
the Bland fallback is termination-safe); warm solves from a caller-supplied
basis run a composite phase 1 that minimizes total bound violation and fall
back to the cold path if they fail to converge quickly. Pricing is Devex by
default (UC relaxations are too degenerate for plain Dantzig), with Dantzig
available and Bland's rule engaging after a stall threshold as the
anti-cycling guard.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .milp import EQ, GE, LE, MilpModel

BASIC, AT_LOWER, AT_UPPER, FREE = 0, 1, 2, 3

_PIV_EPS = 1e-8
# degenerate UC phases legitimately go thousands of pivots without objective
# movement; Bland is strictly a cycling guard of last resort
_BLAND_STALL = 8000
_WARM_PHASE1_CAP = 4000


class LpNumericalFailure(Exception):
    """Cycling guard exhausted: the fallback pivot rule did not terminate in budget."""


@dataclass
class LpResult:
    status: str                  # optimal | infeasible | unbounded | iterlimit | timelimit
    objective: float
    x: np.ndarray                # structural primal values
    x_ext: np.ndarray            # structural + slack + artificial values
    duals: np.ndarray
    reduced_costs: np.ndarray    # extended; near zero on the basis at optimality
    basis: np.ndarray
    vstat: np.ndarray
    iterations: int


class SimplexEngine:
    """Reusable solver state for one row structure; bounds vary per solve."""

    def __init__(self, model: MilpModel, feas_tol: float = 1e-7, opt_tol: float = 1e-7,
                 refactor_every: int = 48, pricing: str = "devex",
                 devex_full_max_rows: int = 3000):
        self.n = model.num_cols
        self.m = model.num_rows
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.refactor_every = refactor_every
        self.pricing = pricing
        self.devex_full_max_rows = devex_full_max_rows
        m = self.m
        eye = sp.identity(m, format="csr")
        self.A_ext = sp.hstack([model.rows, eye, eye]).tocsc()
        self.A_ext_T = self.A_ext.T.tocsr()
        self.b = model.row_rhs.astype(float)
        self.slack_lo = np.where(model.row_sense == GE, -np.inf, 0.0)
        self.slack_up = np.where(model.row_sense == LE, np.inf, 0.0)
        self.base_struct_lo = model.col_lower.astype(float)
        self.base_struct_up = model.col_upper.astype(float)
        self.c = np.concatenate([model.col_obj, np.zeros(2 * m)])
        self._wtol = feas_tol * max(1.0, float(np.abs(self.b).max(initial=1.0)))
        self._lu = None
        self._etas: list[tuple[int, np.ndarray]] = []
        self._solve_hint = None
        self._last_basis = None
        self._lo = None
        self._up = None

    @property
    def num_ext(self) -> int:
        return self.n + 2 * self.m

    # -- factorization ------------------------------------------------------

    def _factorize(self, basis: np.ndarray) -> bool:
        B = self.A_ext[:, basis].tocsc()
        try:
            self._lu = splu(B)
        except RuntimeError:
            return False
        self._etas = []
        return True

    def _ftran(self, v: np.ndarray) -> np.ndarray:
        w = self._lu.solve(v)
        for r, a in self._etas:
            wr = w[r] / a[r]
            w -= a * wr
            w[r] = wr
        return w

    def _btran(self, v: np.ndarray) -> np.ndarray:
        w = v.copy()
        for r, a in reversed(self._etas):
            s = a @ w
            w[r] = (w[r] - s + a[r] * w[r]) / a[r]
        return self._lu.solve(w, trans="T")

    def _column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        a = self.A_ext
        col[a.indices[a.indptr[j]:a.indptr[j + 1]]] = a.data[a.indptr[j]:a.indptr[j + 1]]
        return col

    def _recompute_basics(self, x: np.ndarray, basis: np.ndarray) -> None:
        x_nb = x.copy()
        x_nb[basis] = 0.0
        rhs = self.b - self.A_ext @ x_nb
        x[basis] = self._ftran(rhs)

    # -- solve --------------------------------------------------------------

    def solve(self, lower: np.ndarray | None = None, upper: np.ndarray | None = None,
              basis: np.ndarray | None = None, vstat: np.ndarray | None = None,
              max_iter: int | None = None, deadline: float | None = None,
              hint: np.ndarray | None = None) -> LpResult:
        """Solve with optional structural-bound overrides and warm basis.

        `hint` optionally places structural nonbasics on a chosen bound side
        (AT_LOWER/AT_UPPER, -1 to leave default) for cold starts; a good hint
        shortens both feasibility and optimality phases considerably.
        """
        n, m, N = self.n, self.m, self.num_ext
        lo = np.concatenate([self.base_struct_lo if lower is None else np.asarray(lower, dtype=float),
                             self.slack_lo, np.zeros(m)])
        up = np.concatenate([self.base_struct_up if upper is None else np.asarray(upper, dtype=float),
                             self.slack_up, np.zeros(m)])
        self._lo, self._up = lo, up
        self._solve_hint = hint
        if max_iter is None:
            max_iter = 20000 + 40 * m

        warm = (basis is not None and vstat is not None and len(basis) == m
                and len(vstat) == N)
        if warm:
            basis = basis.astype(np.int64).copy()
            vstat = vstat.astype(np.int8).copy()
            # plunging children warm-start from the basis the engine already
            # holds factorized; skip the LU in that common case
            if (self._last_basis is not None and len(self._etas) < self.refactor_every
                    and np.array_equal(basis, self._last_basis)):
                warm = True
            else:
                warm = self._factorize(basis)
        if warm:
            x = np.zeros(N)
            vstat[(vstat == AT_LOWER) & np.isinf(lo)] = FREE
            vstat[(vstat == AT_UPPER) & np.isinf(up)] = FREE
            x[vstat == AT_LOWER] = lo[vstat == AT_LOWER]
            x[vstat == AT_UPPER] = up[vstat == AT_UPPER]
            self._recompute_basics(x, basis)
            state = _State(basis, vstat, x, lo, up)
        else:
            state = self._cold_start(lo, up)
        return self._iterate(state, max_iter, deadline)

    def _cold_start(self, lo: np.ndarray, up: np.ndarray) -> "_State":
        n, m, N = self.n, self.m, self.num_ext
        vstat = np.full(N, AT_LOWER, dtype=np.int8)
        finite_lo = np.isfinite(lo)
        vstat[~finite_lo & np.isfinite(up)] = AT_UPPER
        vstat[~finite_lo & ~np.isfinite(up)] = FREE
        hint = self._solve_hint
        if hint is not None:
            usable = (hint >= 0) & np.isfinite(np.where(hint == AT_UPPER, up[:n], lo[:n]))
            vstat[:n][usable] = hint[usable]
        x = np.zeros(N)
        x[vstat == AT_LOWER] = lo[vstat == AT_LOWER]
        x[vstat == AT_UPPER] = up[vstat == AT_UPPER]
        x[n:] = 0.0

        resid = self.b - self.A_ext[:, :n] @ x[:n]
        basis = np.empty(m, dtype=np.int64)
        art_sign = np.zeros(m)
        for i in range(m):
            slo, sup = self.slack_lo[i], self.slack_up[i]
            r = resid[i]
            if slo - 1e-12 <= r <= sup + 1e-12:
                basis[i] = n + i          # slack carries the row
                x[n + i] = r
                vstat[n + i] = BASIC
                vstat[n + m + i] = AT_LOWER
            else:
                sb = min(max(r, slo), sup)  # park slack at its nearest bound
                x[n + i] = sb
                vstat[n + i] = AT_LOWER if sb == slo else AT_UPPER
                delta = r - sb
                basis[i] = n + m + i
                x[n + m + i] = delta
                vstat[n + m + i] = BASIC
                # one-sided: the far side stays open so the artificial never
                # becomes a degenerate blocker for its own elimination
                if delta > 0:
                    lo[n + m + i], up[n + m + i] = 0.0, np.inf
                    art_sign[i] = 1.0
                else:
                    lo[n + m + i], up[n + m + i] = -np.inf, 0.0
                    art_sign[i] = -1.0
        if not self._factorize(basis):
            raise LpNumericalFailure("initial basis failed to factorize")
        return _State(basis, vstat, x, lo, up, art_sign=art_sign)

    def _iterate(self, st: "_State", max_iter: int, deadline: float | None,
                 restarts: int = 0) -> LpResult:
        n, m, N = self.n, self.m, self.num_ext
        ftol, otol = self.feas_tol, self.opt_tol
        # escalate after singular restarts: larger pivots only; the repair
        # mode cleans up any bound drift the coarser ratio test lets through
        piv_eps = min(_PIV_EPS * (30.0 ** restarts), 3e-5)
        lo, up, x, basis, vstat = st.lo, st.up, st.x, st.basis, st.vstat

        def restart(budget_left: int) -> LpResult:
            if restarts >= 4:
                raise LpNumericalFailure("repeated numerically singular bases")
            st2 = self._cold_start(self._lo.copy(), self._up.copy())
            return self._iterate(st2, budget_left, deadline, restarts + 1)

        c1 = np.zeros(N)
        if st.art_sign is not None:
            active = st.art_sign != 0.0
            c1[n + m:][active] = st.art_sign[active]
        arts_active = bool(c1.any())

        bland = False
        stall = 0
        last_metric = np.inf
        last_mode = ""
        repair_iters = 0
        gamma = np.ones(N)
        d = np.zeros(N)
        y = np.zeros(m)
        iters = 0

        while True:
            if iters >= max_iter:
                return self._result("iterlimit", x, basis, vstat, d, y, iters)
            if deadline is not None and (iters & 127) == 0 and time.monotonic() > deadline:
                return self._result("timelimit", x, basis, vstat, d, y, iters)

            x_b = x[basis]
            lob = lo[basis]
            upb = up[basis]
            viol_low = x_b < lob - ftol
            viol_up = x_b > upb + ftol

            # Mode dispatch: repair bound violations first (warm starts and
            # numerical drift), then price artificials out, then optimize.
            if viol_low.any() or viol_up.any():
                mode = "repair"
                repair_iters += 1
                if repair_iters > _WARM_PHASE1_CAP:
                    return restart(max_iter - iters)
                sigma = viol_up.astype(float) - viol_low.astype(float)
                y = self._btran(sigma)
                d = -(self.A_ext_T @ y)
                metric = float(np.sum(lob[viol_low] - x_b[viol_low])
                               + np.sum(x_b[viol_up] - upb[viol_up]))
            elif arts_active:
                mode = "art"
                metric = float(c1 @ x)
                if metric <= self._wtol:
                    self._finish_phase1(st, c1)
                    arts_active = False
                    continue
                y = self._btran(c1[basis])
                d = c1 - self.A_ext_T @ y
            else:
                mode = "opt"
                y = self._btran(self.c[basis])
                d = self.c - self.A_ext_T @ y
                metric = float(self.c @ x)

            if mode != last_mode:
                last_mode = mode
                last_metric = np.inf
                stall = 0
                bland = False
            if metric < last_metric - 1e-12 * (1.0 + abs(last_metric)):
                last_metric = metric
                stall = 0
                bland = False
            else:
                stall += 1
                if stall > _BLAND_STALL:
                    bland = True

            movable = up > lo
            elig_up = ((vstat == AT_LOWER) | (vstat == FREE)) & movable & (d < -otol)
            elig_dn = ((vstat == AT_UPPER) | (vstat == FREE)) & movable & (d > otol)
            if not (elig_up.any() or elig_dn.any()):
                if mode == "repair":
                    return self._result("infeasible", x, basis, vstat, d, y, iters)
                if mode == "art":
                    if float(c1 @ x) > self._wtol:
                        return self._result("infeasible", x, basis, vstat, d, y, iters)
                    self._finish_phase1(st, c1)
                    arts_active = False
                    continue
                return self._result("optimal", x, basis, vstat, d, y, iters)

            if bland:
                cand = np.nonzero(elig_up | elig_dn)[0]
                j = int(cand[0])
                dirn = 1 if elig_up[j] else -1
            else:
                score = np.where(elig_up, -d, 0.0)
                score = np.maximum(score, np.where(elig_dn, d, 0.0))
                if self.pricing == "devex":
                    score = score * score / gamma
                j = int(np.argmax(score))
                dirn = 1 if (elig_up[j] and (not elig_dn[j] or -d[j] >= d[j])) else -1

            alpha = self._ftran(self._column(j))
            step = -dirn * alpha

            tlim = np.full(m, np.inf)
            hit_upper = np.zeros(m, dtype=bool)
            feas_b = ~(viol_low | viol_up)
            pos = step > piv_eps
            neg = step < -piv_eps

            sel = pos & feas_b & np.isfinite(upb)
            tlim[sel] = np.maximum(upb[sel] - x_b[sel], 0.0) / step[sel]
            hit_upper[sel] = True
            sel = neg & feas_b & np.isfinite(lob)
            tlim[sel] = np.maximum(x_b[sel] - lob[sel], 0.0) / (-step[sel])
            sel = pos & viol_low
            tlim[sel] = (lob[sel] - x_b[sel]) / step[sel]
            sel = neg & viol_up
            tlim[sel] = (x_b[sel] - upb[sel]) / (-step[sel])
            hit_upper[sel] = True

            t_block = float(tlim.min()) if m else np.inf
            rng = up[j] - lo[j]
            t_flip = float(rng) if np.isfinite(rng) else np.inf

            if not np.isfinite(t_block) and not np.isfinite(t_flip):
                if mode != "opt":
                    raise LpNumericalFailure("feasibility ray with no blocking bound")
                return self._result("unbounded", x, basis, vstat, d, y, iters)

            if t_flip <= t_block:
                x[basis] = x_b + t_flip * step
                if dirn == 1:
                    x[j] = up[j]
                    vstat[j] = AT_UPPER
                else:
                    x[j] = lo[j]
                    vstat[j] = AT_LOWER
                iters += 1
                continue

            near = tlim <= t_block * (1.0 + 1e-9) + 1e-12
            cand = np.nonzero(near)[0]
            if bland:
                r = int(cand[np.argmin(basis[cand])])
            else:
                r = int(cand[np.argmax(np.abs(alpha[cand]))])
            if abs(alpha[r]) < max(1e-6, 10 * piv_eps) and len(self._etas) >= 8:
                # small pivots must be validated against a fresh factor: eta
                # drift at this magnitude can fake a nonzero entry
                if not self._factorize(basis):
                    return restart(max_iter - iters)
                self._recompute_basics(x, basis)
                continue
            t = max(float(tlim[r]), 0.0)

            if self.pricing == "devex" and not bland:
                arq = alpha[r]
                gq = max(gamma[j], 1.0)
                if m <= self.devex_full_max_rows:
                    # full reference update needs the pivot row
                    rho = np.zeros(m)
                    rho[r] = 1.0
                    arow = self.A_ext_T @ self._btran(rho)
                    arq = arow[j] if abs(arow[j]) > 1e-12 else arq
                    ratio = arow / arq
                    np.maximum(gamma, ratio * ratio * gq, out=gamma)
                gamma[basis[r]] = max(gq / (arq * arq), 1.0)
                if float(gamma.max()) > 1e12:
                    gamma[:] = 1.0

            leaving = int(basis[r])
            x[basis] = x_b + t * step
            x[j] = x[j] + dirn * t
            if hit_upper[r]:
                x[leaving] = upb[r]
                vstat[leaving] = AT_UPPER
            else:
                x[leaving] = lob[r]
                vstat[leaving] = AT_LOWER
            basis[r] = j
            vstat[j] = BASIC
            self._etas.append((r, alpha))
            if len(self._etas) >= self.refactor_every:
                if not self._factorize(basis):
                    return restart(max_iter - iters)
                self._recompute_basics(x, basis)
            iters += 1

    def _finish_phase1(self, st: "_State", c1: np.ndarray) -> None:
        """Fix artificials at zero, drive basic ones out where possible."""
        n, m = self.n, self.m
        lo, up, x, basis, vstat = st.lo, st.up, st.x, st.basis, st.vstat
        lo[n + m:] = 0.0
        up[n + m:] = 0.0
        c1[:] = 0.0
        art_pos = [r for r in range(m) if basis[r] >= n + m]
        for r in art_pos:
            rho = np.zeros(m)
            rho[r] = 1.0
            arow = self.A_ext_T @ self._btran(rho)
            arow[n + m:] = 0.0
            arow[basis] = 0.0
            fixed = up <= lo
            arow[fixed & (np.arange(self.num_ext) != basis[r])] = 0.0
            jbest = int(np.argmax(np.abs(arow)))
            if abs(arow[jbest]) > 1e-7:
                old = int(basis[r])
                alpha = self._ftran(self._column(jbest))
                basis[r] = jbest
                vstat[jbest] = BASIC
                vstat[old] = AT_LOWER
                x[old] = 0.0
                self._etas.append((r, alpha))
        self._recompute_basics(x, basis)

    def _result(self, status: str, x, basis, vstat, d, y, iters) -> LpResult:
        self._last_basis = basis.copy()
        obj = float(self.c @ x) if status != "infeasible" else np.inf
        return LpResult(status=status, objective=obj, x=x[:self.n].copy(), x_ext=x.copy(),
                        duals=y.copy(), reduced_costs=d.copy(), basis=basis.copy(),
                        vstat=vstat.copy(), iterations=iters)

    # -- tableau access (cut separation) -------------------------------------

    def tableau_row(self, pos: int) -> np.ndarray:
        """Row `pos` of B^-1 A_ext for the basis of the last solve."""
        e = np.zeros(self.m)
        e[pos] = 1.0
        rho = self._btran(e)
        return self.A_ext_T @ rho

    @property
    def bounds_used(self) -> tuple[np.ndarray, np.ndarray]:
        return self._lo, self._up


@dataclass
class _State:
    basis: np.ndarray
    vstat: np.ndarray
    x: np.ndarray
    lo: np.ndarray
    up: np.ndarray
    art_sign: np.ndarray | None = None


def solve_lp(model: MilpModel, warm_basis: tuple[np.ndarray, np.ndarray] | None = None,
             feas_tol: float = 1e-7, opt_tol: float = 1e-7,
             max_iter: int | None = None) -> LpResult:
    """Solve the LP relaxation of `model` (integrality ignored).

    Returns primal values, reduced costs and the final basis for warm starts.
    Raises LpNumericalFailure when the anti-cycling budget is exhausted.
    """
    model.validate()
    engine = SimplexEngine(model)
    basis = vstat = None
    if warm_basis is not None:
        basis, vstat = warm_basis
    res = engine.solve(basis=basis, vstat=vstat, max_iter=max_iter)
    if res.status == "iterlimit":
        raise LpNumericalFailure(f"simplex did not converge in {res.iterations} iterations")
    return res
