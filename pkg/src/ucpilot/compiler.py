"""Compile a validated schema into the canonical UC MILP; extract and re-check solutions.

Formulation: three-binary commitment (on/off u, start v, stop w) with
aggregated-window minimum up/down rows, startup/shutdown-tightened capacity
coupling, and per-period ramp rows referencing the initial state. Row order
is fixed and documented so compilation is deterministic; counting formulas
per family are exact and tested.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import Code, Diagnostic, error, errors_in
from .milp import EQ, GE, LE, MilpModel, ModelBuilder
from .schema import UcSchema, validate_feasibility

MW_TOL = 1e-6


class CompileRejected(Exception):
    """Error findings are outstanding; compilation refuses to proceed."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__(f"{len(diagnostics)} blocking findings")


class NonIntegralAssignment(Exception):
    """A binary sits farther from {0,1} than the integrality tolerance."""


@dataclass(frozen=True)
class VariableIndex:
    """Bijective (unit, period) -> column map; 4 * n_units * T columns total.

    Layout: u block, then p, v, w; within a block unit-major, period-minor.
    """

    n_units: int
    horizon: int

    def _at(self, block: int, i: int, t: int) -> int:
        nt = self.n_units * self.horizon
        return block * nt + i * self.horizon + t

    def u(self, i: int, t: int) -> int:
        return self._at(0, i, t)

    def p(self, i: int, t: int) -> int:
        return self._at(1, i, t)

    def v(self, i: int, t: int) -> int:
        return self._at(2, i, t)

    def w(self, i: int, t: int) -> int:
        return self._at(3, i, t)

    @property
    def num_cols(self) -> int:
        return 4 * self.n_units * self.horizon

    def describe(self, col: int) -> tuple[str, int, int]:
        nt = self.n_units * self.horizon
        block, rest = divmod(col, nt)
        i, t = divmod(rest, self.horizon)
        return ("u", "p", "v", "w")[block], i, t


def expected_row_counts(n_units: int, horizon: int, n_groups: int) -> dict[str, int]:
    """Exact per-family row counts for any fleet size and horizon."""
    I, T = n_units, horizon
    return {
        "balance": T,
        "reserve": T,
        "cap_lo": I * T,
        "cap_su": I * T,
        "cap_sd": I * (T - 1),
        "logic": I * T,
        "min_up": I * T,
        "min_down": I * T,
        "ramp_up": I * T,
        "ramp_down": I * T,
        "exclusive": n_groups * T,
    }


def compile_uc(s: UcSchema, diagnostics: list[Diagnostic] | None = None
               ) -> tuple[MilpModel, VariableIndex]:
    """Build the MILP for a schema with zero outstanding error findings."""
    if diagnostics is None:
        diagnostics = validate_feasibility(s)
    blocking = errors_in(diagnostics)
    if blocking:
        raise CompileRejected(blocking)

    I, T = s.n_units, s.horizon
    h = s.period_hours
    idx = VariableIndex(I, T)
    b = ModelBuilder()

    must_on = _forced_on(s)
    must_off = _forced_off(s)
    for block, tag in ((0, "u"), (1, "p"), (2, "v"), (3, "w")):
        for i, g in enumerate(s.generators):
            for t in range(T):
                name = f"{tag}[{i},{t}]"
                if tag == "u":
                    lo = 1.0 if must_on[i][t] else 0.0
                    up = 0.0 if must_off[i][t] else 1.0
                    b.add_column(name, lo, up, g.cost_noload * h, integer=True)
                elif tag == "p":
                    b.add_column(name, 0.0, g.p_max, g.cost_var * h)
                elif tag == "v":
                    b.add_column(name, 0.0, 1.0, g.cost_start, integer=True)
                else:
                    b.add_column(name, 0.0, 1.0, 0.0, integer=True)

    for t in range(T):
        b.add_row({idx.p(i, t): 1.0 for i in range(I)}, EQ, s.demand[t], "balance")
    for t in range(T):
        coefs = {}
        for i, g in enumerate(s.generators):
            coefs[idx.u(i, t)] = g.p_max
            coefs[idx.p(i, t)] = -1.0
        b.add_row(coefs, GE, s.reserve[t], "reserve")
    for i, g in enumerate(s.generators):
        for t in range(T):
            b.add_row({idx.p(i, t): 1.0, idx.u(i, t): -g.p_min}, GE, 0.0, "cap_lo")
    for i, g in enumerate(s.generators):
        for t in range(T):
            b.add_row({idx.p(i, t): 1.0, idx.u(i, t): -g.p_max,
                       idx.v(i, t): g.p_max - g.startup_limit}, LE, 0.0, "cap_su")
    for i, g in enumerate(s.generators):
        for t in range(T - 1):
            b.add_row({idx.p(i, t): 1.0, idx.u(i, t): -g.p_max,
                       idx.w(i, t + 1): g.p_max - g.shutdown_limit}, LE, 0.0, "cap_sd")
    for i, g in enumerate(s.generators):
        init = 1.0 if g.init_on else 0.0
        for t in range(T):
            coefs = {idx.u(i, t): 1.0, idx.v(i, t): -1.0, idx.w(i, t): 1.0}
            if t == 0:
                b.add_row(coefs, EQ, init, "logic")
            else:
                coefs[idx.u(i, t - 1)] = -1.0
                b.add_row(coefs, EQ, 0.0, "logic")
    for i, g in enumerate(s.generators):
        for t in range(T):
            coefs = {idx.v(i, tau): 1.0 for tau in range(max(0, t - g.min_up + 1), t + 1)}
            coefs[idx.u(i, t)] = -1.0
            b.add_row(coefs, LE, 0.0, "min_up")
    for i, g in enumerate(s.generators):
        for t in range(T):
            coefs = {idx.w(i, tau): 1.0 for tau in range(max(0, t - g.min_down + 1), t + 1)}
            coefs[idx.u(i, t)] = 1.0
            b.add_row(coefs, LE, 1.0, "min_down")
    for i, g in enumerate(s.generators):
        init_u = 1.0 if g.init_on else 0.0
        init_p = g.init_power if g.init_on else 0.0
        for t in range(T):
            if t == 0:
                b.add_row({idx.p(i, 0): 1.0, idx.v(i, 0): -g.startup_limit},
                          LE, init_p + g.ramp_up * init_u, "ramp_up")
            else:
                b.add_row({idx.p(i, t): 1.0, idx.p(i, t - 1): -1.0,
                           idx.u(i, t - 1): -g.ramp_up, idx.v(i, t): -g.startup_limit},
                          LE, 0.0, "ramp_up")
    for i, g in enumerate(s.generators):
        init_p = g.init_power if g.init_on else 0.0
        for t in range(T):
            if t == 0:
                b.add_row({idx.p(i, 0): -1.0, idx.u(i, 0): -g.ramp_down,
                           idx.w(i, 0): -g.shutdown_limit}, LE, -init_p, "ramp_down")
            else:
                b.add_row({idx.p(i, t - 1): 1.0, idx.p(i, t): -1.0,
                           idx.u(i, t): -g.ramp_down, idx.w(i, t): -g.shutdown_limit},
                          LE, 0.0, "ramp_down")
    for group in s.exclusive_groups:
        for t in range(T):
            b.add_row({idx.u(i, t): 1.0 for i in group}, LE, 1.0, "exclusive")

    return b.build(), idx


def _forced_on(s: UcSchema) -> list[list[bool]]:
    I, T = s.n_units, s.horizon
    on = [[False] * T for _ in range(I)]
    for i, g in enumerate(s.generators):
        if g.init_on:
            residual = max(0, g.min_up - g.init_periods_in_state)
            for t in range(min(residual, T)):
                on[i][t] = True
    for gi, (a, bnd) in s.must_run:
        for t in range(max(0, a), min(T, bnd + 1)):
            on[gi][t] = True
    return on


def _forced_off(s: UcSchema) -> list[list[bool]]:
    I, T = s.n_units, s.horizon
    off = [[False] * T for _ in range(I)]
    for i, g in enumerate(s.generators):
        if not g.init_on:
            residual = max(0, g.min_down - g.init_periods_in_state)
            for t in range(min(residual, T)):
                off[i][t] = True
    return off


def commitment_hint(s: UcSchema, idx: VariableIndex) -> dict[int, int]:
    """Greedy merit-order commitment used as a solver start hint.

    Returns column -> bound side (0 lower, 1 upper). Not necessarily feasible;
    it only steers the cold start of the root relaxation and the search keeps
    every guarantee regardless.
    """
    I, T = s.n_units, s.horizon
    order = sorted(range(I), key=lambda i: (s.generators[i].cost_var, i))
    on = [[False] * T for _ in range(I)]
    for t in range(T):
        need = s.demand[t] + s.reserve[t]
        cap = 0.0
        for i in order:
            if cap >= need:
                break
            on[i][t] = True
            cap += s.generators[i].p_max
    for i, g in enumerate(s.generators):
        t = 0
        while t < T:
            if on[i][t]:
                run = 0
                while t + run < T and on[i][t + run]:
                    run += 1
                if run < g.min_up:
                    for k in range(t, min(T, t + g.min_up)):
                        on[i][k] = True
                    run = max(run, min(T, t + g.min_up) - t)
                t += run
            else:
                t += 1
        t = 1
        while t < T:  # close off-gaps shorter than min_down
            if not on[i][t] and on[i][t - 1]:
                gap = 0
                while t + gap < T and not on[i][t + gap]:
                    gap += 1
                if gap < g.min_down and t + gap < T:
                    for k in range(t, t + gap):
                        on[i][k] = True
                t += max(gap, 1)
            else:
                t += 1
    for gi, (a, b) in s.must_run:
        for t in range(max(0, a), min(T, b + 1)):
            on[gi][t] = True
    hint: dict[int, int] = {}
    for i, g in enumerate(s.generators):
        prev = g.init_on
        for t in range(T):
            cur = on[i][t]
            hint[idx.u(i, t)] = int(cur)
            hint[idx.p(i, t)] = int(cur)
            hint[idx.v(i, t)] = int(cur and not prev)
            hint[idx.w(i, t)] = int(prev and not cur)
            prev = cur
    return hint


def dive_columns(idx: VariableIndex) -> list[int]:
    """Commitment block for the solver's rounding dive: fixing u forces v/w."""
    return [idx.u(i, t) for i in range(idx.n_units) for t in range(idx.horizon)]


def temporal_priorities(idx: VariableIndex) -> dict[int, int]:
    """Early-period commitment binaries first: decisions cascade forward in
    time through the ramp and min-up/down coupling, so settling the prefix
    collapses the rest of the horizon."""
    T = idx.horizon
    out = {}
    for i in range(idx.n_units):
        for t in range(T):
            out[idx.u(i, t)] = max(0, 9 - (10 * t) // max(T, 1))
    return out


@dataclass
class UcSolution:
    commitment: list[list[bool]]
    dispatch: list[list[float]]
    startups: list[tuple[int, int]]
    shutdowns: list[tuple[int, int]]
    total_cost: float
    cost_breakdown: dict[str, float]
    reserve_slack: list[float]

    def to_dict(self) -> dict:
        return {
            "commitment": [[bool(v) for v in row] for row in self.commitment],
            "dispatch": [[float(v) for v in row] for row in self.dispatch],
            "startups": [list(e) for e in self.startups],
            "shutdowns": [list(e) for e in self.shutdowns],
            "total_cost": self.total_cost,
            "cost_breakdown": dict(self.cost_breakdown),
            "reserve_slack": list(self.reserve_slack),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UcSolution":
        return cls(
            commitment=[[bool(v) for v in row] for row in d["commitment"]],
            dispatch=[[float(v) for v in row] for row in d["dispatch"]],
            startups=[tuple(e) for e in d["startups"]],
            shutdowns=[tuple(e) for e in d["shutdowns"]],
            total_cost=float(d["total_cost"]),
            cost_breakdown=dict(d["cost_breakdown"]),
            reserve_slack=[float(v) for v in d["reserve_slack"]],
        )


def _round9(v: float) -> float:
    r = round(float(v), 9)
    return 0.0 if r == 0 else r  # avoid -0.0 in reports


def extract_solution(model: MilpModel, idx: VariableIndex, assignment: np.ndarray,
                     s: UcSchema, integrality_tol: float = 1e-6) -> UcSolution:
    """Turn a solver-feasible assignment into the schedule report object.

    Binaries must verify integral within tolerance before rounding at 0.5;
    values are canonically rounded to 1e-9 so text and JSON renderings agree.
    """
    I, T = s.n_units, s.horizon
    h = s.period_hours
    x = np.asarray(assignment, dtype=float)
    binaries = np.concatenate([
        [x[idx.u(i, t)] for i in range(I) for t in range(T)],
        [x[idx.v(i, t)] for i in range(I) for t in range(T)],
        [x[idx.w(i, t)] for i in range(I) for t in range(T)],
    ])
    dist = np.abs(binaries - np.round(binaries))
    if dist.size and float(dist.max()) > integrality_tol:
        bad = int(np.argmax(dist))
        raise NonIntegralAssignment(
            f"binary value {binaries[bad]:.6f} is {dist[bad]:.2e} from integral "
            f"(tolerance {integrality_tol:g})")

    commitment = [[bool(x[idx.u(i, t)] >= 0.5) for t in range(T)] for i in range(I)]
    dispatch = [[0.0] * T for _ in range(I)]
    for i in range(I):
        for t in range(T):
            dispatch[i][t] = _round9(x[idx.p(i, t)]) if commitment[i][t] else 0.0

    startups, shutdowns = [], []
    for i, g in enumerate(s.generators):
        prev = g.init_on
        for t in range(T):
            cur = commitment[i][t]
            if cur and not prev:
                startups.append((i, t))
            if prev and not cur:
                shutdowns.append((i, t))
            prev = cur

    var_cost = sum(s.generators[i].cost_var * h * dispatch[i][t]
                   for i in range(I) for t in range(T))
    noload_cost = sum(s.generators[i].cost_noload * h
                      for i in range(I) for t in range(T) if commitment[i][t])
    start_cost = sum(s.generators[i].cost_start for i, _ in startups)
    breakdown = {"variable": _round9(var_cost), "no_load": _round9(noload_cost),
                 "start_up": _round9(start_cost)}
    total = _round9(breakdown["variable"] + breakdown["no_load"] + breakdown["start_up"])
    reserve_slack = []
    for t in range(T):
        headroom = sum(s.generators[i].p_max * commitment[i][t] - dispatch[i][t]
                       for i in range(I))
        reserve_slack.append(_round9(headroom - s.reserve[t]))
    return UcSolution(commitment, dispatch, startups, shutdowns, total, breakdown,
                      reserve_slack)


def post_validate(sol: UcSolution, s: UcSchema, tol: float = MW_TOL) -> list[Diagnostic]:
    """Re-check every constraint family directly on the schedule numbers.

    Independent of the MILP: works from commitment booleans and dispatch MW
    only, so a formulation bug cannot hide its own violations.
    """
    I, T = s.n_units, s.horizon
    out: list[Diagnostic] = []

    def viol(family: str, subject: str, magnitude: float, unit: int | None, period: int | None,
             text: str) -> None:
        out.append(error(Code.POST_SOLVE_VIOLATION, subject,
                         f"{family}: {text} (magnitude {magnitude:.6g})",
                         family=family, unit=unit, period=period, magnitude=magnitude))

    on = sol.commitment
    p = sol.dispatch
    for t in range(T):
        total = sum(p[i][t] for i in range(I))
        if abs(total - s.demand[t]) > tol:
            viol("balance", f"demand[{t}]", abs(total - s.demand[t]), None, t,
                 f"dispatch sums to {total:.6g} MW against demand {s.demand[t]:.6g} MW at period {t}")
        headroom = sum(s.generators[i].p_max * on[i][t] - p[i][t] for i in range(I))
        if headroom < s.reserve[t] - tol:
            viol("reserve", f"reserve[{t}]", s.reserve[t] - headroom, None, t,
                 f"spinning headroom {headroom:.6g} MW under requirement {s.reserve[t]:.6g} MW at period {t}")

    for i, g in enumerate(s.generators):
        prev_on = g.init_on
        prev_p = g.init_power if g.init_on else 0.0
        for t in range(T):
            cur = on[i][t]
            pit = p[i][t]
            started = cur and not prev_on
            stopping = (t + 1 < T and cur and not on[i][t + 1])
            if cur:
                if pit < g.p_min - tol:
                    viol("cap_lo", f"dispatch[{i}][{t}]", g.p_min - pit, i, t,
                         f"unit {g.name} below p_min while on")
                cap = g.p_max
                if started:
                    cap = min(cap, g.startup_limit)
                if stopping:
                    cap = min(cap, g.shutdown_limit)
                if pit > cap + tol:
                    fam = "cap_su" if started and cap == g.startup_limit else (
                        "cap_sd" if stopping else "cap_up")
                    viol(fam, f"dispatch[{i}][{t}]", pit - cap, i, t,
                         f"unit {g.name} above its {'startup' if started else 'shutdown' if stopping else 'capacity'} limit")
            else:
                if abs(pit) > tol:
                    viol("logic", f"dispatch[{i}][{t}]", abs(pit), i, t,
                         f"unit {g.name} dispatching while off")
            if cur and not prev_on:
                if pit - prev_p > g.startup_limit + tol:
                    viol("ramp_up", f"dispatch[{i}][{t}]", pit - prev_p - g.startup_limit, i, t,
                         f"unit {g.name} start-up jump exceeds startup limit")
            elif cur and prev_on:
                if pit - prev_p > g.ramp_up + tol:
                    viol("ramp_up", f"dispatch[{i}][{t}]", pit - prev_p - g.ramp_up, i, t,
                         f"unit {g.name} ramps up too fast into period {t}")
            if prev_on and not cur:
                if prev_p > g.shutdown_limit + tol:
                    viol("ramp_down", f"dispatch[{i}][{t}]", prev_p - g.shutdown_limit, i, t,
                         f"unit {g.name} shuts down from above its shutdown limit")
            elif prev_on and cur:
                if prev_p - pit > g.ramp_down + tol:
                    viol("ramp_down", f"dispatch[{i}][{t}]", prev_p - pit - g.ramp_down, i, t,
                         f"unit {g.name} ramps down too fast into period {t}")
            prev_on, prev_p = cur, pit

    # run-length checks with initial-state credit
    for i, g in enumerate(s.generators):
        if T and on[i][0] != g.init_on:
            # state change at t=0 must respect the residual pre-horizon obligation
            need = g.min_up if g.init_on else g.min_down
            if g.init_periods_in_state < need:
                fam = "min_up" if g.init_on else "min_down"
                viol(fam, f"commitment[{i}][0]", float(need - g.init_periods_in_state), i, 0,
                     f"unit {g.name} changes state at period 0 after only "
                     f"{g.init_periods_in_state} periods in its initial state")
        runs = _runs(on[i], g.init_on, g.init_periods_in_state)
        for state, start, length, hits_end in runs:
            if hits_end:
                continue  # horizon may truncate the final run
            if state and length < g.min_up:
                viol("min_up", f"commitment[{i}]", g.min_up - length, i, start,
                     f"unit {g.name} on-run of {length} periods from period {start} is under min_up {g.min_up}")
            if not state and length < g.min_down:
                viol("min_down", f"commitment[{i}]", g.min_down - length, i, start,
                     f"unit {g.name} off-run of {length} periods from period {start} is under min_down {g.min_down}")

    must_on = [[False] * T for _ in range(I)]
    for gi, (a, bnd) in s.must_run:
        for t in range(max(0, a), min(T, bnd + 1)):
            must_on[gi][t] = True
    for i in range(I):
        for t in range(T):
            if must_on[i][t] and not on[i][t]:
                viol("must_run", f"commitment[{i}][{t}]", 1.0, i, t,
                     f"unit {s.generators[i].name} off inside its must-run window")
    for gidx, group in enumerate(s.exclusive_groups):
        for t in range(T):
            live = [i for i in group if on[i][t]]
            if len(live) > 1:
                viol("exclusive", f"exclusive_groups[{gidx}]", float(len(live) - 1), None, t,
                     f"{len(live)} mutually exclusive units on at period {t}")
    return out


def _runs(series: list[bool], init_state: bool, init_len: int
          ) -> list[tuple[bool, int, int, bool]]:
    """(state, start, length, reaches_horizon_end); first run credits pre-horizon periods."""
    out = []
    T = len(series)
    t = 0
    while t < T:
        state = series[t]
        start = t
        while t < T and series[t] == state:
            t += 1
        length = t - start
        if start == 0 and state == init_state:
            length += max(0, init_len)
        out.append((state, start, length, t == T))
    return out


def solution_table(sol: UcSolution, s: UcSchema) -> str:
    """Human-readable schedule; every number equals its JSON counterpart."""
    I, T = s.n_units, s.horizon
    lines = [f"schedule: {I} units x {T} periods ({s.period_hours!r} h each)"]
    lines.append(f"total cost: {sol.total_cost!r} $  "
                 f"(variable {sol.cost_breakdown['variable']!r}, "
                 f"no-load {sol.cost_breakdown['no_load']!r}, "
                 f"start-up {sol.cost_breakdown['start_up']!r})")
    header = "unit    " + " ".join(f"{t:>8d}" for t in range(T))
    lines.append(header)
    for i, g in enumerate(s.generators):
        row = "".join(f" {sol.dispatch[i][t]!r:>8}" if sol.commitment[i][t] else f" {'-':>8}"
                      for t in range(T))
        lines.append(f"{g.name:<8}" + row)
    lines.append("startups: " + (", ".join(f"{s.generators[i].name}@{t}" for i, t in sol.startups) or "none"))
    lines.append("shutdowns: " + (", ".join(f"{s.generators[i].name}@{t}" for i, t in sol.shutdowns) or "none"))
    lines.append("reserve slack: " + " ".join(repr(v) for v in sol.reserve_slack))
    return "\n".join(lines) + "\n"
