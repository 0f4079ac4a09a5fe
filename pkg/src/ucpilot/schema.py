"""Typed unit-commitment parameter object, validation rules, and ucjson persistence."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .diagnostics import Code, Diagnostic, Edit, error, warning, errors_in
from .scenario import RawExtraction

MERIT_CLASSES = ("base-load", "mid-merit", "peaker")

UCJSON_VERSION = 1


@dataclass
class GeneratorSpec:
    name: str
    p_min: float
    p_max: float
    cost_var: float
    cost_noload: float = 0.0
    cost_start: float = 0.0
    ramp_up: float = 0.0
    ramp_down: float = 0.0
    min_up: int = 1
    min_down: int = 1
    startup_limit: float = 0.0
    shutdown_limit: float = 0.0
    init_on: bool = False
    init_periods_in_state: int = 1
    init_power: float = 0.0
    merit_class: str = "mid-merit"


@dataclass
class UcSchema:
    generators: list[GeneratorSpec]
    horizon: int
    period_hours: float
    demand: list[float]
    reserve: list[float]
    must_run: list[tuple[int, tuple[int, int]]] = field(default_factory=list)
    exclusive_groups: list[list[int]] = field(default_factory=list)

    @property
    def n_units(self) -> int:
        return len(self.generators)

    def to_dict(self) -> dict:
        return {
            "version": UCJSON_VERSION,
            "horizon": self.horizon,
            "period_hours": self.period_hours,
            "generators": [asdict(g) for g in self.generators],
            "demand": list(self.demand),
            "reserve": list(self.reserve),
            "must_run": [{"unit": i, "start": s, "end": e} for i, (s, e) in self.must_run],
            "exclusive_groups": [list(g) for g in self.exclusive_groups],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UcSchema":
        gens = [GeneratorSpec(**g) for g in d["generators"]]
        return cls(
            generators=gens,
            horizon=int(d["horizon"]),
            period_hours=float(d["period_hours"]),
            demand=[float(v) for v in d["demand"]],
            reserve=[float(v) for v in d["reserve"]],
            must_run=[(int(m["unit"]), (int(m["start"]), int(m["end"]))) for m in d.get("must_run", [])],
            exclusive_groups=[[int(i) for i in g] for g in d.get("exclusive_groups", [])],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "UcSchema":
        return cls.from_dict(json.loads(Path(path).read_text()))


# Conservative defaults for absent optional generator fields. Each applied
# default is surfaced as a warning so nothing fills in silently.
def _defaults_for(row: dict, T: int) -> dict:
    p_min = float(row.get("p_min", 0.0))
    return {
        "cost_noload": 0.0,
        "cost_start": 0.0,
        "ramp_up": None,            # required, no safe default
        "ramp_down": None,
        "min_up": 1,
        "min_down": 1,
        "startup_limit": p_min,
        "shutdown_limit": p_min,
        "init_on": False,
        "init_periods_in_state": None,   # min_down once known
        "init_power": 0.0,
        "merit_class": "mid-merit",
    }


_REQUIRED_GEN_FIELDS = ("name", "p_min", "p_max", "cost_var")
_INT_GEN_FIELDS = ("min_up", "min_down", "init_periods_in_state")


def typecheck(raw: RawExtraction) -> tuple[UcSchema | None, list[Diagnostic]]:
    """Type, range and shape validation of a raw extraction.

    Returns the fully populated schema and the complete diagnostic list
    (defaults applied to optional fields are recorded as warnings). When any
    shape or type error prevents construction, the schema slot is None and
    the diagnostics carry every failure found, not just the first.
    """
    diags: list[Diagnostic] = []
    fatal = False

    if raw.horizon_hint is not None:
        T = int(raw.horizon_hint[0])
        period_hours = float(raw.horizon_hint[1])
    elif raw.demand_series:
        T = len(raw.demand_series)
        period_hours = 1.0
        diags.append(warning(Code.MISSING_FIELD, "horizon",
                             f"horizon missing; assumed {T} periods of 1 h from demand length"))
    else:
        diags.append(error(Code.MISSING_FIELD, "horizon", "no horizon and no demand to infer it from"))
        return None, diags
    if T < 1:
        diags.append(error(Code.SHAPE_MISMATCH, "horizon", f"horizon must be >= 1, got {T}"))
        return None, diags

    # demand / reserve shapes
    demand = [math.nan] * T
    seen = set()
    for t, v in raw.demand_series:
        if t < 0 or t >= T:
            diags.append(error(Code.SHAPE_MISMATCH, f"demand[{t}]",
                               f"demand index {t} outside horizon [0,{T})"))
            fatal = True
        elif t in seen:
            diags.append(error(Code.SHAPE_MISMATCH, f"demand[{t}]", f"duplicate demand entry for period {t}"))
            fatal = True
        else:
            demand[t] = float(v)
            seen.add(t)
    missing = [t for t in range(T) if t not in seen]
    if missing:
        diags.append(error(Code.SHAPE_MISMATCH, "demand",
                           f"demand has {len(seen)} entries but horizon is {T} (missing periods {missing[:5]}{'...' if len(missing) > 5 else ''})",
                           details={"missing": missing}))
        fatal = True
    for t in range(T):
        if not math.isnan(demand[t]) and demand[t] < 0:
            diags.append(error(Code.BOUND_ORDER, f"demand[{t}]", f"demand[{t}] = {demand[t]} is negative",
                               fix=Edit(f"demand[{t}]", demand[t], 0.0)))
            fatal = True

    if raw.reserve_series is not None:
        if raw.reserve_fraction is not None:
            diags.append(warning(Code.SHAPE_MISMATCH, "reserve",
                                 "reserve given both as fraction and series; series wins"))
        reserve = [math.nan] * T
        rseen = set()
        for t, v in raw.reserve_series:
            if t < 0 or t >= T:
                diags.append(error(Code.SHAPE_MISMATCH, f"reserve[{t}]",
                                   f"reserve index {t} outside horizon [0,{T})"))
                fatal = True
            else:
                reserve[t] = float(v)
                rseen.add(t)
        if len(rseen) != T:
            diags.append(error(Code.SHAPE_MISMATCH, "reserve",
                               f"reserve has {len(rseen)} entries but horizon is {T}"))
            fatal = True
        for t in range(T):
            if not math.isnan(reserve[t]) and reserve[t] < 0:
                diags.append(error(Code.BOUND_ORDER, f"reserve[{t}]", f"reserve[{t}] = {reserve[t]} is negative",
                                   fix=Edit(f"reserve[{t}]", reserve[t], 0.0)))
                fatal = True
    elif raw.reserve_fraction is not None:
        r = float(raw.reserve_fraction)
        if r < 0:
            diags.append(error(Code.BOUND_ORDER, "reserve", f"reserve fraction {r} is negative",
                               fix=Edit("reserve_fraction", r, 0.0)))
            fatal = True
            reserve = [0.0] * T
        else:
            reserve = [r * d if not math.isnan(d) else math.nan for d in demand]
    else:
        reserve = [0.0] * T
        diags.append(warning(Code.MISSING_FIELD, "reserve", "reserve missing; defaulted to zero vector"))

    # generators
    gens: list[GeneratorSpec] = []
    if not raw.generator_rows:
        diags.append(error(Code.MISSING_FIELD, "generators", "no generators"))
        return None, diags
    for gi, row in enumerate(raw.generator_rows):
        path = f"generators[{gi}]"
        gfatal = False
        for f in _REQUIRED_GEN_FIELDS:
            if f not in row:
                diags.append(error(Code.MISSING_FIELD, f"{path}.{f}", f"required field {f} missing"))
                gfatal = True
        if gfatal:
            fatal = True
            continue
        vals = dict(row)
        defaults = _defaults_for(row, T)
        for f, dv in defaults.items():
            if f not in vals:
                if f in ("ramp_up", "ramp_down"):
                    # no safe default: assume the unit can traverse its range
                    dv = float(vals.get("p_max", 0.0))
                elif f == "init_periods_in_state":
                    dv = int(vals.get("min_down", defaults["min_down"]))
                diags.append(warning(Code.MISSING_FIELD, f"{path}.{f}",
                                     f"{f} missing; defaulted to {dv}", fix=None))
                vals[f] = dv
        for f in _INT_GEN_FIELDS:
            v = vals[f]
            if isinstance(v, float) and v != int(v):
                diags.append(error(Code.SHAPE_MISMATCH, f"{path}.{f}", f"{f} must be an integer period count, got {v}"))
                fatal = True
                gfatal = True
            else:
                vals[f] = int(v)
        if gfatal:
            continue
        if vals["merit_class"] not in MERIT_CLASSES:
            diags.append(warning(Code.UNIT_ERROR, f"{path}.merit_class",
                                 f"unknown merit class {vals['merit_class']!r}; defaulted to mid-merit",
                                 fix=Edit(f"{path}.merit_class", vals["merit_class"], "mid-merit")))
            vals["merit_class"] = "mid-merit"
        known = set(GENERATOR_FIELD_NAMES)
        for f in list(vals):
            if f not in known:
                diags.append(warning(Code.MISSING_FIELD, f"{path}.{f}", f"unknown field {f} ignored"))
                del vals[f]
        g = GeneratorSpec(**vals)
        diags.extend(_check_generator(g, gi, T))
        gens.append(g)

    # policies
    must_run: list[tuple[int, tuple[int, int]]] = []
    exclusive: list[list[int]] = []
    name_to_idx = {g.name: i for i, g in enumerate(gens)}
    mr_count = 0
    ex_count = 0
    for pi, pol in enumerate(raw.policy_statements):
        ppath = f"policy_statements[{pi}]"
        if pol.unresolved or any(u not in name_to_idx for u in pol.units):
            diags.append(error(Code.UNRESOLVED_REFERENCE, ppath,
                               f"policy references unknown unit(s): {pol.text or pol.units}",
                               fix=Edit(ppath, pol.to_dict(), None)))
            continue
        if pol.kind == "must_run":
            s, e = pol.interval
            idx = name_to_idx[pol.units[0]]
            if s > e or s < 0 or e >= T:
                clamped = (max(0, min(s, T - 1)), max(0, min(e, T - 1)))
                diags.append(error(Code.SHAPE_MISMATCH, f"must_run[{mr_count}]",
                                   f"must-run interval [{s},{e}] outside horizon [0,{T})",
                                   fix=Edit(f"must_run[{mr_count}]", [s, e], list(clamped))))
            must_run.append((idx, (s, e)))
            mr_count += 1
        elif pol.kind == "exclusive":
            exclusive.append(sorted(name_to_idx[u] for u in pol.units))
            ex_count += 1

    # Non-fatal range errors still yield a schema object (the repair loop
    # edits concrete values); shape failures that prevent building the
    # arrays do not.
    if fatal or len(gens) != len(raw.generator_rows):
        return None, diags

    schema = UcSchema(generators=gens, horizon=T, period_hours=period_hours,
                      demand=demand, reserve=reserve, must_run=must_run,
                      exclusive_groups=exclusive)
    return schema, diags


GENERATOR_FIELD_NAMES = tuple(GeneratorSpec("", 0, 0, 0).__dict__.keys())


def _check_generator(g: GeneratorSpec, gi: int, T: int) -> list[Diagnostic]:
    path = f"generators[{gi}]"
    out = []
    if g.p_min < 0:
        out.append(error(Code.BOUND_ORDER, f"{path}.p_min", f"p_min = {g.p_min} < 0",
                         fix=Edit(f"{path}.p_min", g.p_min, 0.0)))
    if g.p_min > g.p_max:
        out.append(error(Code.BOUND_ORDER, path,
                         f"p_min = {g.p_min} exceeds p_max = {g.p_max}",
                         fix=Edit(path, {"p_min": g.p_min, "p_max": g.p_max},
                                  {"p_min": g.p_max, "p_max": g.p_min})))
        return out  # downstream range checks are meaningless until fixed
    for f in ("ramp_up", "ramp_down"):
        v = getattr(g, f)
        if v <= 0:
            out.append(error(Code.RAMP_INFEASIBLE, f"{path}.{f}", f"{f} = {v} must be positive"))
    for f in ("cost_var", "cost_noload", "cost_start"):
        v = getattr(g, f)
        if v < 0:
            out.append(error(Code.BOUND_ORDER, f"{path}.{f}", f"{f} = {v} is negative",
                             fix=Edit(f"{path}.{f}", v, 0.0)))
    for f in ("startup_limit", "shutdown_limit"):
        v = getattr(g, f)
        if not (g.p_min <= v <= g.p_max):
            clamped = min(max(v, g.p_min), g.p_max)
            out.append(error(Code.BOUND_ORDER, f"{path}.{f}",
                             f"{f} = {v} outside [p_min, p_max] = [{g.p_min}, {g.p_max}]",
                             fix=Edit(f"{path}.{f}", v, clamped)))
    for f in ("min_up", "min_down"):
        v = getattr(g, f)
        if not (1 <= v <= T):
            clamped = min(max(v, 1), T)
            out.append(error(Code.BOUND_ORDER, f"{path}.{f}", f"{f} = {v} outside [1, {T}]",
                             fix=Edit(f"{path}.{f}", v, clamped)))
    if g.init_periods_in_state < 0:
        out.append(error(Code.BOUND_ORDER, f"{path}.init_periods_in_state",
                         f"init_periods_in_state = {g.init_periods_in_state} < 0",
                         fix=Edit(f"{path}.init_periods_in_state", g.init_periods_in_state, 0)))
    if g.init_on and not (0 <= g.init_power <= g.p_max):
        clamped = min(max(g.init_power, g.p_min), g.p_max)
        out.append(error(Code.BOUND_ORDER, f"{path}.init_power",
                         f"init_power = {g.init_power} outside [0, p_max]",
                         fix=Edit(f"{path}.init_power", g.init_power, clamped)))
    return out


def validate_feasibility(s: UcSchema) -> list[Diagnostic]:
    """Structural-infeasibility screens on a typechecked schema.

    An empty list means no structural infeasibility was detected; it is not
    a feasibility certificate.
    """
    diags: list[Diagnostic] = []
    T = s.horizon
    n = s.n_units

    must_run_at = [[False] * T for _ in range(n)]
    for gi, (a, b) in s.must_run:
        for t in range(max(0, a), min(T, b + 1)):
            must_run_at[gi][t] = True

    # forced-off lock from the initial state vs must-run windows
    for gi, g in enumerate(s.generators):
        if not g.init_on:
            residual = max(0, g.min_down - g.init_periods_in_state)
            for t in range(min(residual, T)):
                if must_run_at[gi][t]:
                    diags.append(error(
                        Code.EXCLUSIVE_MUST_RUN_CONFLICT, f"generators[{gi}]",
                        f"unit {g.name} is locked off until period {residual} by its initial "
                        f"minimum-down state but a must-run window covers period {t}"))
                    break

    # exclusivity vs must-run overlap
    for group_i, group in enumerate(s.exclusive_groups):
        for t in range(T):
            forced = [gi for gi in group if must_run_at[gi][t]]
            if len(forced) > 1:
                names = ", ".join(s.generators[gi].name for gi in forced)
                diags.append(error(Code.EXCLUSIVE_MUST_RUN_CONFLICT,
                                   f"exclusive_groups[{group_i}]",
                                   f"units {names} are mutually exclusive but all must run at period {t}",
                                   period=t))
                break

    # per-period capacity accounting for exclusivity choices
    in_group = set()
    for group in s.exclusive_groups:
        in_group.update(group)
    free_cap = sum(g.p_max for gi, g in enumerate(s.generators) if gi not in in_group)
    for t in range(T):
        cap = free_cap
        for group in s.exclusive_groups:
            forced = [gi for gi in group if must_run_at[gi][t]]
            if forced:
                cap += s.generators[forced[0]].p_max
            else:
                cap += max(s.generators[gi].p_max for gi in group)
        need = s.demand[t] + s.reserve[t]
        if cap < need - 1e-9:
            diags.append(error(Code.CAPACITY_SHORTFALL, f"demand[{t}]",
                               f"period {t}: committable capacity {cap:.6g} MW cannot cover "
                               f"demand + reserve = {need:.6g} MW", period=t, shortfall=need - cap))

    # fleet ramping vs demand swings
    total_up = sum(g.ramp_up + g.startup_limit for g in s.generators)
    total_down = sum(g.ramp_down + g.shutdown_limit for g in s.generators)
    for t in range(1, T):
        swing = s.demand[t] - s.demand[t - 1]
        if swing > total_up + 1e-9:
            diags.append(error(Code.RAMP_INFEASIBLE, f"demand[{t}]",
                               f"demand rises {swing:.6g} MW into period {t} but the fleet can "
                               f"add at most {total_up:.6g} MW per period", period=t))
        if -swing > total_down + 1e-9:
            diags.append(error(Code.RAMP_INFEASIBLE, f"demand[{t}]",
                               f"demand falls {-swing:.6g} MW into period {t} but the fleet can "
                               f"shed at most {total_down:.6g} MW per period", period=t))

    for gi, g in enumerate(s.generators):
        if g.p_max > g.p_min and (g.p_max - g.p_min) > T * g.ramp_up:
            diags.append(warning(Code.RAMP_INFEASIBLE, f"generators[{gi}].ramp_up",
                                 f"unit {g.name} cannot traverse its own output range within the horizon"))
        if g.min_up + g.min_down > T:
            for mi, (mgi, (a, b)) in enumerate(s.must_run):
                if mgi == gi and (b - a + 1) < g.min_up:
                    diags.append(warning(Code.EXCLUSIVE_MUST_RUN_CONFLICT, f"must_run[{mi}]",
                                         f"unit {g.name}: min_up + min_down exceed the horizon and the "
                                         f"must-run window is shorter than min_up"))
    return diags
