"""Valid-inequality separation: Gomory mixed-integer, clique, up/down implication.

One invocation performs one separation round over the current LP point; the
solver loop re-solves and re-invokes up to the configured pass count. Every
emitted row is globally valid (satisfied by all integral feasible points):
Gomory rows are derived only at the root where column bounds equal the model
bounds, and the structural families are valid by construction.

The clique and up/down families read the documented column naming
(``u[i,t]``, ``v[i,t]``, ``w[i,t]``) and the row family tags; on models
without that structure they simply find nothing.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field as dc_field

import numpy as np

from .milp import GE, LE, MilpModel
from .simplex import AT_LOWER, AT_UPPER, BASIC, SimplexEngine

AGGRESSIVENESS_LEVELS = ("conservative", "normal", "aggressive")

# violation thresholds per aggressiveness: (gomory fractionality margin,
# structural-cut violation, per-round gomory cap)
_THRESHOLDS = {
    "conservative": (0.05, 0.10, 10),
    "normal": (0.02, 0.05, 25),
    "aggressive": (0.005, 0.01, 50),
}


@dataclass
class SeparatorConfig:
    """Whitelisted separator action space; the guard clamps anything outside it."""

    gomory_enabled: bool = True
    clique_enabled: bool = True
    updown_implication_enabled: bool = True
    max_passes: int = 1
    aggressiveness: str = "conservative"
    guard_trail: tuple = dc_field(default_factory=tuple, compare=False)

    def to_dict(self) -> dict:
        return {"gomory_enabled": self.gomory_enabled,
                "clique_enabled": self.clique_enabled,
                "updown_implication_enabled": self.updown_implication_enabled,
                "max_passes": self.max_passes,
                "aggressiveness": self.aggressiveness}

    def any_enabled(self) -> bool:
        return (self.gomory_enabled or self.clique_enabled
                or self.updown_implication_enabled) and self.max_passes > 0


@dataclass
class Cut:
    coefs: dict[int, float]
    sense: int
    rhs: float
    family: str

    def violation(self, x: np.ndarray) -> float:
        lhs = sum(c * x[j] for j, c in self.coefs.items())
        return (self.rhs - lhs) if self.sense == GE else (lhs - self.rhs)

    def key(self) -> tuple:
        scale = max(abs(c) for c in self.coefs.values())
        items = tuple(sorted((j, round(c / scale, 9)) for j, c in self.coefs.items()))
        return (self.sense, items, round(self.rhs / scale, 9))


def separate_cuts(lp_res, model: MilpModel, config: SeparatorConfig,
                  engine: SimplexEngine | None = None,
                  existing_keys: set | None = None,
                  structural_only: bool = False) -> list[Cut]:
    """One separation round at the given LP point; empty when nothing separates."""
    f_margin, sviol, gcap = _THRESHOLDS[config.aggressiveness]
    existing_keys = existing_keys if existing_keys is not None else _row_keys(model)
    cuts: list[Cut] = []
    if config.clique_enabled:
        cuts.extend(_clique_cuts(lp_res.x, model, sviol))
    if config.updown_implication_enabled:
        cuts.extend(_updown_cuts(lp_res.x, model, sviol))
    if config.gomory_enabled and engine is not None and not structural_only:
        cuts.extend(_gomory_cuts(lp_res, model, engine, f_margin, gcap))
    out = []
    for cut in cuts:
        k = cut.key()
        if k in existing_keys:
            continue
        existing_keys.add(k)
        out.append(cut)
    return out


def _row_keys(model: MilpModel) -> set:
    keys = set()
    csr = model.rows
    for r in range(model.num_rows):
        seg = slice(csr.indptr[r], csr.indptr[r + 1])
        coefs = {int(csr.indices[k]): float(csr.data[k]) for k in range(seg.start, seg.stop)}
        if coefs:
            keys.add(Cut(coefs, int(model.row_sense[r]), float(model.row_rhs[r]), "").key())
    return keys


# -- Gomory mixed-integer cuts from the simplex basis -------------------------

def _gomory_cuts(lp_res, model: MilpModel, engine: SimplexEngine,
                 f_margin: float, cap: int) -> list[Cut]:
    n = model.num_cols
    lo, up = engine.bounds_used
    x = lp_res.x_ext
    vstat = lp_res.vstat
    basis = lp_res.basis
    is_int_ext = np.concatenate([model.col_integer, np.zeros(2 * engine.m, dtype=bool)])

    frac = np.abs(x[basis] - np.round(x[basis]))
    rows = [(r, float(frac[r])) for r in range(len(basis))
            if basis[r] < n and is_int_ext[basis[r]]
            and f_margin <= (x[basis[r]] - math.floor(x[basis[r]])) <= 1.0 - f_margin]
    rows.sort(key=lambda rf: (-min(rf[1], 1 - rf[1]), rf[0]))

    out = []
    for r, _ in rows[:cap]:
        tab = engine.tableau_row(r)
        # the factor must still describe this LP result: the row of a basic
        # column is a unit vector there, anything else means stale state
        if abs(tab[basis[r]] - 1.0) > 1e-7:
            break
        others = tab[basis]
        if np.count_nonzero(np.abs(others) > 1e-7) > 1:
            break
        cut = _gmi_from_row(tab, float(x[basis[r]]), basis, vstat, lo, up, is_int_ext,
                            model, engine.m)
        if cut is not None:
            out.append(cut)
    return out


def _gmi_from_row(tab: np.ndarray, beta: float, basis, vstat, lo, up, is_int_ext,
                  model: MilpModel, m: int):
    f0 = beta - math.floor(beta)
    one_m_f0 = 1.0 - f0
    N = len(tab)
    n = model.num_cols
    gamma = np.zeros(N)
    at_upper = np.zeros(N, dtype=bool)
    in_basis = np.zeros(N, dtype=bool)
    in_basis[basis] = True

    for j in range(N):
        if in_basis[j] or abs(tab[j]) < 1e-12:
            continue
        if up[j] - lo[j] <= 0:
            continue  # fixed column: its shifted variable is identically zero
        if vstat[j] == AT_UPPER:
            if not np.isfinite(up[j]):
                return None
            alpha = -tab[j]
            at_upper[j] = True
        elif vstat[j] == AT_LOWER:
            if not np.isfinite(lo[j]):
                return None
            alpha = tab[j]
        else:
            return None  # free nonbasic: no safe shift
        integral_shift = (is_int_ext[j]
                          and abs((up[j] if at_upper[j] else lo[j]) - round(up[j] if at_upper[j] else lo[j])) < 1e-9)
        if integral_shift:
            fj = alpha - math.floor(alpha)
            g = fj if fj <= f0 else f0 * (1.0 - fj) / one_m_f0
        else:
            g = alpha if alpha >= 0 else f0 * (-alpha) / one_m_f0
        gamma[j] = g

    # back to original variables: sum over NL of g*(x-l) + sum over NU of g*(u-x) >= f0
    coefs = np.where(at_upper, -gamma, gamma)
    rhs = f0
    for j in np.nonzero(gamma)[0]:
        rhs += (-gamma[j] * up[j]) if at_upper[j] else (gamma[j] * lo[j])

    # substitute slack columns s_q = b_q - a_q . x (artificials are fixed at 0
    # and never receive a coefficient)
    slack_part = coefs[n:n + m]
    if np.any(slack_part != 0.0):
        adj = model.rows.T @ slack_part  # length n
        struct = coefs[:n] - adj
        rhs -= float(model.row_rhs @ slack_part)
    else:
        struct = coefs[:n]

    struct = np.asarray(struct).ravel()
    if not np.all(np.isfinite(struct)) or not math.isfinite(rhs):
        return None
    # relax away negligible coefficients using the variable's safe bound
    keep = {}
    for j in np.nonzero(struct)[0]:
        c = float(struct[j])
        if abs(c) < 1e-9:
            bound = lo[j] if c > 0 else up[j]
            if not np.isfinite(bound):
                return None
            rhs -= c * bound
        else:
            keep[int(j)] = c
    if not keep:
        return None
    mags = [abs(c) for c in keep.values()]
    if max(mags) / min(mags) > 1e8 or max(mags) > 1e8:
        return None
    return Cut(keep, GE, rhs, "cut_gomory")


# -- clique cuts over exclusivity structure -----------------------------------

def _clique_cuts(x: np.ndarray, model: MilpModel, thresh: float) -> list[Cut]:
    rows_by_period: dict[tuple, list[list[int]]] = {}
    csr = model.rows
    name_re = re.compile(r"^u\[(\d+),(\d+)\]$")
    for r, fam in enumerate(model.row_families):
        if fam != "exclusive":
            continue
        seg = slice(csr.indptr[r], csr.indptr[r + 1])
        cols = [int(c) for c in csr.indices[seg.start:seg.stop]]
        period = None
        ok = True
        for c in cols:
            mm = name_re.match(model.col_names[c])
            if not mm:
                ok = False
                break
            t = int(mm.group(2))
            if period is None:
                period = t
            elif period != t:
                ok = False
                break
        key = (period,) if ok else ("row", r)
        rows_by_period.setdefault(key, []).append(cols)

    out = []
    for key, groups in sorted(rows_by_period.items(), key=lambda kv: str(kv[0])):
        adj: dict[int, set[int]] = {}
        for cols in groups:
            for a in cols:
                adj.setdefault(a, set()).update(c for c in cols if c != a)
        row_sets = {frozenset(cols) for cols in groups}
        seen = set()
        for cols in groups:
            clique = sorted(cols, key=lambda c: (-x[c], c))
            members = set(clique)
            candidates = sorted(set.intersection(*(adj[c] for c in clique)) - members,
                                key=lambda c: (-x[c], c))
            for cand in candidates:
                if all(cand in adj.get(mcol, ()) for mcol in members):
                    members.add(cand)
            if frozenset(members) in row_sets or frozenset(members) in seen:
                continue
            lhs = sum(x[c] for c in members)
            if lhs > 1.0 + thresh:
                seen.add(frozenset(members))
                out.append(Cut({c: 1.0 for c in sorted(members)}, LE, 1.0, "cut_clique"))
    return out


# -- minimum up/down implication window cuts -----------------------------------

_NAME_RE = re.compile(r"^([uvw])\[(\d+),(\d+)\]$")


def _uc_layout(model: MilpModel):
    """Recover the (unit, period) column layout from the documented naming."""
    cols: dict[tuple[str, int, int], int] = {}
    units = set()
    T = -1
    for j, name in enumerate(model.col_names):
        mm = _NAME_RE.match(name)
        if mm:
            kind, i, t = mm.group(1), int(mm.group(2)), int(mm.group(3))
            cols[(kind, i, t)] = j
            units.add(i)
            T = max(T, t + 1)
    if not cols:
        return None
    return cols, sorted(units), T


def _window_lengths(model: MilpModel, cols, units, family: str, flag_kind: str) -> dict[int, int]:
    """Max aggregated-window length per unit from min_up/min_down rows."""
    lengths = {i: 1 for i in units}
    kind_of = {}
    for (kind, i, t), j in cols.items():
        kind_of[j] = (kind, i, t)
    csr = model.rows
    for r, fam in enumerate(model.row_families):
        if fam != family:
            continue
        seg = slice(csr.indptr[r], csr.indptr[r + 1])
        window = 0
        unit = None
        for c in csr.indices[seg.start:seg.stop]:
            info = kind_of.get(int(c))
            if info and info[0] == flag_kind:
                window += 1
                unit = info[1]
        if unit is not None:
            lengths[unit] = max(lengths[unit], window)
    return lengths


def _updown_cuts(x: np.ndarray, model: MilpModel, thresh: float) -> list[Cut]:
    layout = _uc_layout(model)
    if layout is None:
        return []
    cols, units, T = layout
    ut = _window_lengths(model, cols, units, "min_up", "v")
    dt = _window_lengths(model, cols, units, "min_down", "w")
    out = []
    for i in units:
        if ut.get(i, 1) >= 2:
            for t in range(T - 1):
                u = cols.get(("u", i, t))
                v = cols.get(("v", i, t))
                if u is None or v is None:
                    continue
                ws = [cols[("w", i, tau)] for tau in range(t + 1, min(t + ut[i], T))
                      if ("w", i, tau) in cols]
                lhs = x[v] + sum(x[j] for j in ws) - x[u]
                if lhs > thresh:
                    coefs = {v: 1.0, u: -1.0}
                    for j in ws:
                        coefs[j] = coefs.get(j, 0.0) + 1.0
                    out.append(Cut(coefs, LE, 0.0, "cut_updown"))
        if dt.get(i, 1) >= 2:
            for t in range(T - 1):
                u = cols.get(("u", i, t))
                w = cols.get(("w", i, t))
                if u is None or w is None:
                    continue
                vs = [cols[("v", i, tau)] for tau in range(t + 1, min(t + dt[i], T))
                      if ("v", i, tau) in cols]
                lhs = x[w] + sum(x[j] for j in vs) + x[u]
                if lhs > 1.0 + thresh:
                    coefs = {w: 1.0, u: 1.0}
                    for j in vs:
                        coefs[j] = coefs.get(j, 0.0) + 1.0
                    out.append(Cut(coefs, LE, 1.0, "cut_updown"))
    return out
