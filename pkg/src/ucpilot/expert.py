"""Hand-maintained reference formulation used as the accuracy baseline.

Kept deliberately independent of the pipeline compiler: rows are built
period-major from scratch here, so a regression in the main template shows up
as an objective disagreement between the two arms. The mathematical content
(variables, families, objective) is the canonical three-binary commitment
model; only construction order and code differ.
"""
from __future__ import annotations

import numpy as np

from .milp import EQ, GE, LE, MilpModel, ModelBuilder
from .schema import UcSchema


def compile_reference(s: UcSchema) -> tuple[MilpModel, "ReferenceIndex"]:
    I, T = s.n_units, s.horizon
    h = s.period_hours
    b = ModelBuilder()
    idx = ReferenceIndex(I, T)

    forced_on = [[False] * T for _ in range(I)]
    forced_off = [[False] * T for _ in range(I)]
    for i, g in enumerate(s.generators):
        residual = max(0, (g.min_up if g.init_on else g.min_down) - g.init_periods_in_state)
        for t in range(min(residual, T)):
            if g.init_on:
                forced_on[i][t] = True
            else:
                forced_off[i][t] = True
    for gi, (a, e) in s.must_run:
        for t in range(max(0, a), min(T, e + 1)):
            forced_on[gi][t] = True

    for t in range(T):
        for i, g in enumerate(s.generators):
            b.add_column(f"u[{i},{t}]", 1.0 if forced_on[i][t] else 0.0,
                         0.0 if forced_off[i][t] else 1.0, g.cost_noload * h, integer=True)
            b.add_column(f"p[{i},{t}]", 0.0, g.p_max, g.cost_var * h)
            b.add_column(f"v[{i},{t}]", 0.0, 1.0, g.cost_start, integer=True)
            b.add_column(f"w[{i},{t}]", 0.0, 1.0, 0.0, integer=True)

    u, p, v, w = idx.u, idx.p, idx.v, idx.w
    for t in range(T):
        b.add_row({p(i, t): 1.0 for i in range(I)}, EQ, s.demand[t], "balance")
        row = {}
        for i, g in enumerate(s.generators):
            row[u(i, t)] = g.p_max
            row[p(i, t)] = -1.0
        b.add_row(row, GE, s.reserve[t], "reserve")
        for i, g in enumerate(s.generators):
            b.add_row({p(i, t): 1.0, u(i, t): -g.p_min}, GE, 0.0, "cap_lo")
            b.add_row({p(i, t): 1.0, u(i, t): -g.p_max, v(i, t): g.p_max - g.startup_limit},
                      LE, 0.0, "cap_su")
            if t + 1 < T:
                b.add_row({p(i, t): 1.0, u(i, t): -g.p_max,
                           w(i, t + 1): g.p_max - g.shutdown_limit}, LE, 0.0, "cap_sd")
            if t == 0:
                b.add_row({u(i, 0): 1.0, v(i, 0): -1.0, w(i, 0): 1.0}, EQ,
                          1.0 if g.init_on else 0.0, "logic")
            else:
                b.add_row({u(i, t): 1.0, u(i, t - 1): -1.0, v(i, t): -1.0, w(i, t): 1.0},
                          EQ, 0.0, "logic")
            up_window = {v(i, tau): 1.0 for tau in range(max(0, t - g.min_up + 1), t + 1)}
            up_window[u(i, t)] = -1.0
            b.add_row(up_window, LE, 0.0, "min_up")
            dn_window = {w(i, tau): 1.0 for tau in range(max(0, t - g.min_down + 1), t + 1)}
            dn_window[u(i, t)] = 1.0
            b.add_row(dn_window, LE, 1.0, "min_down")
            if t == 0:
                init_u = 1.0 if g.init_on else 0.0
                init_p = g.init_power if g.init_on else 0.0
                b.add_row({p(i, 0): 1.0, v(i, 0): -g.startup_limit}, LE,
                          init_p + g.ramp_up * init_u, "ramp_up")
                b.add_row({p(i, 0): -1.0, u(i, 0): -g.ramp_down, w(i, 0): -g.shutdown_limit},
                          LE, -init_p, "ramp_down")
            else:
                b.add_row({p(i, t): 1.0, p(i, t - 1): -1.0, u(i, t - 1): -g.ramp_up,
                           v(i, t): -g.startup_limit}, LE, 0.0, "ramp_up")
                b.add_row({p(i, t - 1): 1.0, p(i, t): -1.0, u(i, t): -g.ramp_down,
                           w(i, t): -g.shutdown_limit}, LE, 0.0, "ramp_down")
        for group in s.exclusive_groups:
            b.add_row({u(i, t): 1.0 for i in group}, LE, 1.0, "exclusive")

    return b.build(), idx


class ReferenceIndex:
    """Period-major layout: 4 columns per (t, i) block."""

    def __init__(self, n_units: int, horizon: int):
        self.n_units = n_units
        self.horizon = horizon

    def _at(self, i: int, t: int, off: int) -> int:
        return (t * self.n_units + i) * 4 + off

    def u(self, i, t):
        return self._at(i, t, 0)

    def p(self, i, t):
        return self._at(i, t, 1)

    def v(self, i, t):
        return self._at(i, t, 2)

    def w(self, i, t):
        return self._at(i, t, 3)
