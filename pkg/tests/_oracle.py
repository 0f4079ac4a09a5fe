"""Exhaustive reference oracle: enumerate commitment patterns, LP-dispatch each.

Deliberately independent of the package solver: dispatch LPs go through
scipy's HiGHS. Pattern screens are exact necessary conditions (never
heuristic), so the minimum over surviving patterns equals the minimum over
all 2^(I*T) commitment matrices.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog


def unit_patterns(g, T: int, must_on_mask: int, forced_off_mask: int) -> list[int]:
    """All feasible on/off bitmasks for one unit (bit t = on at period t)."""
    out = []
    for mask in range(1 << T):
        if (mask & must_on_mask) != must_on_mask:
            continue
        if mask & forced_off_mask:
            continue
        if _runs_ok(mask, g, T):
            out.append(mask)
    return out


def _runs_ok(mask: int, g, T: int) -> bool:
    prev = g.init_on
    runlen = g.init_periods_in_state
    for t in range(T):
        cur = bool((mask >> t) & 1)
        if cur == prev:
            runlen += 1
        else:
            need = g.min_up if prev else g.min_down
            if runlen < need:
                return False
            prev = cur
            runlen = 1
    return True


def masks_for(schema):
    T = schema.horizon
    must_on = [0] * schema.n_units
    for gi, (a, b) in schema.must_run:
        for t in range(max(0, a), min(T, b + 1)):
            must_on[gi] |= 1 << t
    forced_off = [0] * schema.n_units
    for i, g in enumerate(schema.generators):
        if not g.init_on:
            for t in range(min(max(0, g.min_down - g.init_periods_in_state), T)):
                forced_off[i] |= 1 << t
        else:
            for t in range(min(max(0, g.min_up - g.init_periods_in_state), T)):
                must_on[i] |= 1 << t
    return must_on, forced_off


def dispatch_cost(schema, pattern: tuple[int, ...]):
    """LP-optimal dispatch cost for a fixed commitment pattern, or None."""
    I, T = schema.n_units, schema.horizon
    h = schema.period_hours
    on = [[bool((pattern[i] >> t) & 1) for t in range(T)] for i in range(I)]

    slots = [(i, t) for i in range(I) for t in range(T) if on[i][t]]
    pos = {s: k for k, s in enumerate(slots)}
    nv = len(slots)
    c = np.array([schema.generators[i].cost_var * h for i, _ in slots])

    lo = np.empty(nv)
    hi = np.empty(nv)
    for (i, t), k in pos.items():
        g = schema.generators[i]
        prev_on = on[i][t - 1] if t > 0 else g.init_on
        next_on = on[i][t + 1] if t + 1 < T else True  # horizon end: no stop event
        ub = g.p_max
        if not prev_on:
            ub = min(ub, g.startup_limit)
        if not next_on:
            ub = min(ub, g.shutdown_limit)
        lo[k] = g.p_min
        hi[k] = ub
        if lo[k] > hi[k] + 1e-12:
            return None

    A_eq = np.zeros((T, nv))
    b_eq = np.asarray(schema.demand, dtype=float)
    for (i, t), k in pos.items():
        A_eq[t, k] = 1.0
    # zero-commitment periods must carry zero demand
    for t in range(T):
        if not A_eq[t].any() and abs(b_eq[t]) > 1e-9:
            return None

    rows, rhs = [], []
    for i in range(I):
        g = schema.generators[i]
        if g.init_on and on[i][0]:
            row = np.zeros(nv)
            row[pos[(i, 0)]] = 1.0
            rows.append(row)
            rhs.append(g.init_power + g.ramp_up)
            row = np.zeros(nv)
            row[pos[(i, 0)]] = -1.0
            rows.append(row)
            rhs.append(g.ramp_down - g.init_power)
        for t in range(1, T):
            if on[i][t] and on[i][t - 1]:
                row = np.zeros(nv)
                row[pos[(i, t)]] = 1.0
                row[pos[(i, t - 1)]] = -1.0
                rows.append(row)
                rhs.append(g.ramp_up)
                rows.append(-row)
                rhs.append(g.ramp_down)
    A_ub = np.array(rows) if rows else None
    b_ub = np.array(rhs) if rows else None

    if nv == 0:
        return 0.0 if not b_eq.any() else None
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=list(zip(lo, hi)), method="highs")
    if res.status != 0:
        return None
    return float(res.fun), res.x, pos


def dispatch_cost_custom(schema, pattern: tuple[int, ...], objective: np.ndarray):
    """Minimize an arbitrary linear objective over a pattern's dispatch polytope."""
    built = _dispatch_lp_data(schema, pattern)
    if built is None:
        return None
    lo, hi, A_eq, b_eq, A_ub, b_ub, pos = built
    nv = len(lo)
    if nv == 0:
        return 0.0 if not b_eq.any() else None
    res = linprog(objective, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=list(zip(lo, hi)), method="highs")
    if res.status != 0:
        return None
    return float(res.fun)


def _dispatch_lp_data(schema, pattern):
    I, T = schema.n_units, schema.horizon
    on = [[bool((pattern[i] >> t) & 1) for t in range(T)] for i in range(I)]
    slots = [(i, t) for i in range(I) for t in range(T) if on[i][t]]
    pos = {s: k for k, s in enumerate(slots)}
    nv = len(slots)
    lo = np.empty(nv)
    hi = np.empty(nv)
    for (i, t), k in pos.items():
        g = schema.generators[i]
        prev_on = on[i][t - 1] if t > 0 else g.init_on
        next_on = on[i][t + 1] if t + 1 < T else True
        ub = g.p_max
        if not prev_on:
            ub = min(ub, g.startup_limit)
        if not next_on:
            ub = min(ub, g.shutdown_limit)
        lo[k] = g.p_min
        hi[k] = ub
        if lo[k] > hi[k] + 1e-12:
            return None
    A_eq = np.zeros((T, nv))
    b_eq = np.asarray(schema.demand, dtype=float)
    for (i, t), k in pos.items():
        A_eq[t, k] = 1.0
    for t in range(T):
        if nv and not A_eq[t].any() and abs(b_eq[t]) > 1e-9:
            return None
    rows, rhs = [], []
    for i in range(I):
        g = schema.generators[i]
        if g.init_on and on[i][0]:
            row = np.zeros(nv)
            row[pos[(i, 0)]] = 1.0
            rows.append(row)
            rhs.append(g.init_power + g.ramp_up)
            rows.append(-row)
            rhs.append(g.ramp_down - g.init_power)
        for t in range(1, T):
            if on[i][t] and on[i][t - 1]:
                row = np.zeros(nv)
                row[pos[(i, t)]] = 1.0
                row[pos[(i, t - 1)]] = -1.0
                rows.append(row)
                rhs.append(g.ramp_up)
                rows.append(-row)
                rhs.append(g.ramp_down)
    A_ub = np.array(rows) if rows else None
    b_ub = np.array(rhs) if rows else None
    return lo, hi, A_eq, b_eq, A_ub, b_ub, pos


def commitment_cost(schema, pattern) -> float:
    I, T = schema.n_units, schema.horizon
    h = schema.period_hours
    cost = 0.0
    for i, g in enumerate(schema.generators):
        mask = pattern[i]
        cost += g.cost_noload * h * bin(mask).count("1")
        prev = g.init_on
        for t in range(T):
            cur = bool((mask >> t) & 1)
            if cur and not prev:
                cost += g.cost_start
            prev = cur
    return cost


def feasible_patterns(schema):
    """Yield every commitment pattern passing the exact combinatorial screens."""
    I, T = schema.n_units, schema.horizon
    must_on, forced_off = masks_for(schema)
    per_unit = [unit_patterns(g, T, must_on[i], forced_off[i])
                for i, g in enumerate(schema.generators)]
    if any(not p for p in per_unit):
        return
    pmax = np.array([g.p_max for g in schema.generators])
    pmin = np.array([g.p_min for g in schema.generators])
    need = np.asarray(schema.demand) + np.asarray(schema.reserve)
    demand = np.asarray(schema.demand)
    groups = [tuple(gr) for gr in schema.exclusive_groups]
    for pattern in itertools.product(*per_unit):
        ok = True
        for gr in groups:
            combined = 0
            for i in gr:
                if combined & pattern[i]:
                    ok = False
                    break
                combined |= pattern[i]
            if not ok:
                break
        if not ok:
            continue
        onmat = np.array([[bool((pattern[i] >> t) & 1) for t in range(T)] for i in range(I)])
        cap = pmax @ onmat
        floor = pmin @ onmat
        if np.any(cap < need - 1e-9) or np.any(floor > demand + 1e-9):
            continue
        yield pattern


def oracle_optimum(schema, return_solution: bool = False):
    """Minimum総 cost over every feasible commitment matrix (inf if none)."""
    best = math.inf
    best_detail = None
    for pattern in feasible_patterns(schema):
        ccost = commitment_cost(schema, pattern)
        lb = ccost + _dispatch_lower_bound(schema, pattern)
        if lb >= best - 1e-12:
            continue
        res = dispatch_cost(schema, pattern)
        if res is None:
            continue
        dcost, x, pos = res
        total = ccost + dcost
        if total < best - 1e-12:
            best = total
            if return_solution:
                best_detail = (pattern, x, pos)
    if return_solution:
        return best, best_detail
    return best


def _dispatch_lower_bound(schema, pattern) -> float:
    """Exact lower bound: every demanded MW costs at least the cheapest committed rate."""
    I, T = schema.n_units, schema.horizon
    h = schema.period_hours
    lb = 0.0
    for t in range(T):
        d = schema.demand[t]
        if d <= 0:
            continue
        rates = [schema.generators[i].cost_var for i in range(I) if (pattern[i] >> t) & 1]
        if not rates:
            return math.inf
        lb += h * d * min(rates)
    return lb
