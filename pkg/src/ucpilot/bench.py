"""Paired runtime and accuracy evaluation protocols.

Runtime: each instance is compiled once (model bytes hashed for pairing
integrity) and solved twice under identical stopping criteria, differing only
in branch priorities; run order alternates arms to decorrelate machine-noise
drift; scorer inference is timed inside the guided arm. Accuracy: the
pipeline formulation and the frozen reference formulation are solved under
identical criteria, solutions post-validated, and validation failures
excluded from gap statistics.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import expert
from .compiler import (commitment_hint, compile_uc, dive_columns, extract_solution,
                       post_validate, temporal_priorities)
from .guidance.features import encode_bipartite
from .guidance.priorities import scores_to_priorities
from .guidance.scorer import ScorerParams, score_graph
from .milp import SolveResult, SolverConfig, Status
from .schema import UcSchema
from .simplex import SimplexEngine


class CohortCompileFailure(Exception):
    """An instance failed compilation; paired statistics would be broken."""


@dataclass
class BenchRecord:
    instance_id: str
    t_default: float
    t_guided: float
    tau: float
    status_default: str
    status_guided: str
    timed_out_default: bool
    timed_out_guided: bool
    objective_default: float | None
    objective_guided: float | None
    gap_default: float
    gap_guided: float
    model_hash: str
    nodes_default: int = 0
    nodes_guided: int = 0


@dataclass
class AccuracyRecord:
    instance_id: str
    units: int
    gap_expert: float
    gap_generated: float
    feasible_expert: bool
    feasible_generated: bool
    validation_failure: bool


def solver_inputs(schema: UcSchema):
    """Compile plus the start hints shared identically by every arm."""
    model, idx = compile_uc(schema)
    return model, idx, commitment_hint(schema, idx), dive_columns(idx)


def guided_priorities(model, idx, policy: ScorerParams) -> dict[int, int]:
    """Root-LP encode, score, and decile-bucket the commitment binaries."""
    engine = SimplexEngine(model)
    res = engine.solve()
    graph = encode_bipartite(model, res)
    scores = score_graph(policy, graph)
    u_cols = [idx.u(i, t) for i in range(idx.n_units) for t in range(idx.horizon)]
    return scores_to_priorities({c: float(scores[c]) for c in u_cols})


def _solve_timed(model, cfg: SolverConfig) -> tuple[SolveResult, float]:
    t0 = time.perf_counter()
    res = branch_and_bound_cached(model, cfg)
    return res, time.perf_counter() - t0


def branch_and_bound_cached(model, cfg):
    from .solver import branch_and_bound
    return branch_and_bound(model, cfg)


def _runtime_one(args) -> BenchRecord:
    instance_id, schema_dict, cfg_kwargs, policy_path, order_flip = args
    schema = UcSchema.from_dict(schema_dict)
    try:
        model, idx, hint, dcols = solver_inputs(schema)
    except Exception as e:
        raise CohortCompileFailure(f"{instance_id}: {e}") from e
    base_cfg = SolverConfig(**cfg_kwargs, warm_hint=hint, dive_cols=dcols)
    model_hash = model.content_hash()

    def run_default():
        return _solve_timed(model, base_cfg)

    def run_guided():
        t0 = time.perf_counter()
        if policy_path is not None:
            policy = ScorerParams.load(policy_path)
            prio = guided_priorities(model, idx, policy)
            cfg = replace(base_cfg, branch_priorities=prio)
        else:
            cfg = base_cfg
        res = branch_and_bound_cached(model, cfg)
        return res, time.perf_counter() - t0

    if order_flip:
        res_g, t_g = run_guided()
        res_d, t_d = run_default()
    else:
        res_d, t_d = run_default()
        res_g, t_g = run_guided()

    cap = base_cfg.time_limit
    to_d = res_d.status == Status.TIME_LIMIT
    to_g = res_g.status == Status.TIME_LIMIT
    t_d_rec = cap if to_d else t_d
    t_g_rec = cap if to_g else t_g
    tau = (t_g_rec / t_d_rec) if not (to_d or to_g) and t_d_rec > 0 else math.nan
    return BenchRecord(
        instance_id=instance_id, t_default=t_d_rec, t_guided=t_g_rec, tau=tau,
        status_default=res_d.status.value, status_guided=res_g.status.value,
        timed_out_default=to_d, timed_out_guided=to_g,
        objective_default=res_d.incumbent_value, objective_guided=res_g.incumbent_value,
        gap_default=res_d.gap, gap_guided=res_g.gap, model_hash=model_hash,
        nodes_default=res_d.nodes_explored, nodes_guided=res_g.nodes_explored)


def run_runtime_cohort(instances, cfg: SolverConfig, policy_path=None,
                       jobs: int = 1) -> tuple[list[BenchRecord], dict]:
    """Paired default/guided timings plus the tau summary.

    `instances` is a list of (instance_id, UcSchema). `policy_path` points at
    a saved scorer; None makes both arms identical (the null protocol).
    """
    cfg_kwargs = {"time_limit": cfg.time_limit, "gap_tolerance": cfg.gap_tolerance,
                  "integrality_tolerance": cfg.integrality_tolerance,
                  "feasibility_tolerance": cfg.feasibility_tolerance,
                  "node_limit": cfg.node_limit, "node_selection": cfg.node_selection,
                  "separator_config": cfg.separator_config, "rng_seed": cfg.rng_seed}
    tasks = [(iid, schema.to_dict(), cfg_kwargs, policy_path, k % 2 == 1)
             for k, (iid, schema) in enumerate(instances)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_runtime_one, tasks))
    else:
        records = [_runtime_one(t) for t in tasks]
    records.sort(key=lambda r: r.instance_id)
    return records, runtime_summary(records)


def runtime_summary(records: list[BenchRecord]) -> dict:
    taus = [r.tau for r in records if math.isfinite(r.tau)]
    t_d = [r.t_default for r in records]
    t_g = [r.t_guided for r in records]
    faster = sum(1 for t in taus if t < 1.0)
    return {
        "instances": len(records),
        "mean_runtime_default": _mean(t_d),
        "mean_runtime_guided": _mean(t_g),
        "median_runtime_default": _median(t_d),
        "median_runtime_guided": _median(t_g),
        "tau_values": taus,
        "tau_mean": _mean(taus),
        "tau_median": _median(taus),
        "share_faster": (faster / len(taus)) if taus else math.nan,
        "timeouts_default": sum(r.timed_out_default for r in records),
        "timeouts_guided": sum(r.timed_out_guided for r in records),
        "pairing_hashes_distinct": len({r.model_hash for r in records}),
    }


def _accuracy_one(args) -> AccuracyRecord:
    instance_id, schema_dict, cfg_kwargs = args
    schema = UcSchema.from_dict(schema_dict)
    try:
        model_gen, idx, hint, dcols = solver_inputs(schema)
        model_exp, idx_exp = expert.compile_reference(schema)
    except Exception as e:
        raise CohortCompileFailure(f"{instance_id}: {e}") from e
    # both arms share the full configuration, including temporal branch
    # priorities, remapped onto each formulation's column layout
    prio = temporal_priorities(idx)
    cfg = SolverConfig(**cfg_kwargs, warm_hint=hint, dive_cols=dcols,
                       branch_priorities=prio)
    exp_hint = {_remap(c, idx, idx_exp): side for c, side in hint.items()}
    cfg_exp = SolverConfig(**cfg_kwargs, warm_hint=exp_hint,
                           dive_cols=[_remap(c, idx, idx_exp) for c in dcols],
                           branch_priorities={_remap(c, idx, idx_exp): p
                                              for c, p in prio.items()})

    res_gen = branch_and_bound_cached(model_gen, cfg)
    res_exp = branch_and_bound_cached(model_exp, cfg_exp)

    feas_gen = res_gen.incumbent_value is not None
    if feas_gen:
        try:
            sol = extract_solution(model_gen, idx, res_gen.assignment, schema)
            feas_gen = not post_validate(sol, schema)
        except Exception:
            feas_gen = False
    feas_exp = res_exp.incumbent_value is not None
    return AccuracyRecord(
        instance_id=instance_id, units=schema.n_units,
        gap_expert=res_exp.gap, gap_generated=res_gen.gap,
        feasible_expert=feas_exp, feasible_generated=feas_gen,
        validation_failure=not feas_gen)


def _remap(col: int, idx, idx_exp) -> int:
    kind, i, t = idx.describe(col)
    return getattr(idx_exp, kind)(i, t)


def run_accuracy_cohort(instances, cfg: SolverConfig, jobs: int = 1
                        ) -> tuple[list[AccuracyRecord], dict]:
    """Expert-vs-generated gap comparison under identical stopping criteria."""
    cfg_kwargs = {"time_limit": cfg.time_limit, "gap_tolerance": cfg.gap_tolerance,
                  "integrality_tolerance": cfg.integrality_tolerance,
                  "feasibility_tolerance": cfg.feasibility_tolerance,
                  "node_limit": cfg.node_limit, "node_selection": cfg.node_selection,
                  "separator_config": cfg.separator_config, "rng_seed": cfg.rng_seed}
    tasks = [(iid, schema.to_dict(), cfg_kwargs) for iid, schema in instances]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_accuracy_one, tasks))
    else:
        records = [_accuracy_one(t) for t in tasks]
    records.sort(key=lambda r: r.instance_id)
    return records, accuracy_summary(records)


def accuracy_summary(records: list[AccuracyRecord]) -> dict:
    usable = [r for r in records if not r.validation_failure]
    by_bin: dict[int, list[AccuracyRecord]] = {}
    for r in usable:
        by_bin.setdefault(r.units, []).append(r)
    bins = {}
    for units, rs in sorted(by_bin.items()):
        bins[str(units)] = {
            "count": len(rs),
            "generated": _gap_stats([r.gap_generated for r in rs]),
            "expert": _gap_stats([r.gap_expert for r in rs]),
        }
    return {
        "instances": len(records),
        "validation_failures": sum(r.validation_failure for r in records),
        "bins": bins,
    }


def _gap_stats(gaps: list[float]) -> dict:
    finite = sorted(g for g in gaps if math.isfinite(g))
    if not finite:
        return {"median": math.nan, "iqr": math.nan, "outliers": 0, "count": 0}
    med = _median(finite)
    q1 = _quantile(finite, 0.25)
    q3 = _quantile(finite, 0.75)
    iqr = q3 - q1
    outliers = sum(1 for g in finite if g > q3 + 1.5 * iqr)
    return {"median": med, "iqr": iqr, "outliers": outliers, "count": len(finite)}


def _mean(vals):
    return (sum(vals) / len(vals)) if vals else math.nan


def _median(vals):
    if not vals:
        return math.nan
    s = sorted(vals)
    n = len(s)
    mid = n // 2
    return float(s[mid]) if n % 2 else (s[mid - 1] + s[mid]) / 2.0


def _quantile(sorted_vals, q):
    n = len(sorted_vals)
    if n == 1:
        return float(sorted_vals[0])
    pos = q * (n - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    return sorted_vals[lo] * (1 - frac) + sorted_vals[hi] * frac
