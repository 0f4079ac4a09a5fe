"""Command-line entry point wiring the pipeline end to end.

Every run writes into a timestamped directory under --out-root containing the
fully resolved configuration echo, outputs, and any requested traces. Exit
codes: 0 success, 2 extraction failure, 3 repair exhausted / validation
errors, 4 solver infeasible, 5 post-solve violation, 6 I/O or config error.
Timestamps stay out of result payloads (run_meta.json and timing files carry
them), so reruns with identical configuration and seeds reproduce identical
JSON reports byte for byte.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import report as report_mod
from .compiler import (CompileRejected, commitment_hint, compile_uc, dive_columns,
                       extract_solution, post_validate)
from .cuts import SeparatorConfig
from .diagnostics import Code, error as diag_error, errors_in
from .engines import make_engine, parse_scenario
from .guidance.features import encode_bipartite, presolve_diagnostics
from .guidance.labels import strong_branching_labels
from .guidance.priorities import scores_to_priorities
from .guidance.scorer import ScorerParams, score_graph, train_scorer
from .guidance.sepconfig import PolicyUnavailable, configure_separators, guard_config
from .instgen import (CohortPlan, FamilySpec, SMALL_SCALE_SIZES, SeedOverlap,
                      gen_cohorts, gen_instance, small_scale_specs)
from .llm import BackendUnavailable, ChatBackend
from .milp import SolverConfig, Status
from .repair import RepairExhausted, repair_loop, validate_document
from .scenario import ExtractionFailed, ScenarioText, render_scenario
from .schema import UcSchema
from .simplex import SimplexEngine
from .solver import branch_and_bound

EXIT_OK = 0
EXIT_EXTRACTION = 2
EXIT_REPAIR = 3
EXIT_INFEASIBLE = 4
EXIT_POST_VALIDATE = 5
EXIT_CONFIG = 6


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> _Parser:
    p = _Parser(prog="ucpilot", description="Scenario-to-solver unit commitment pipeline")
    p.add_argument("--out-root", default="runs", help="directory that receives run directories")
    sub = p.add_subparsers(dest="cmd", required=True)

    def add_solver_flags(sp):
        sp.add_argument("--time-limit", type=float, default=600.0)
        sp.add_argument("--gap-tol", type=float, default=1e-6)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--guidance", choices=("on", "off"), default="off")
        sp.add_argument("--policy", default=None, help="scorer parameter file (.npz)")
        sp.add_argument("--seps", choices=("rule", "remote", "off"), default="off")
        sp.add_argument("--trace-solver", action="store_true")
        sp.add_argument("--no-figures", action="store_true")

    def add_engine_flags(sp):
        sp.add_argument("--engine", choices=("grammar", "remote", "replay"), default="grammar")
        sp.add_argument("--replay-fixture", default=None)
        sp.add_argument("--record-fixture", default=None)
        sp.add_argument("--llm-config", default=None)
        sp.add_argument("--trace-llm", action="store_true")
        sp.add_argument("--repair-budget", type=int, default=5)

    sp = sub.add_parser("pipeline", help="parse, validate, repair, compile, solve, report")
    sp.add_argument("scenario", help="scenario text file (.ucs)")
    add_engine_flags(sp)
    add_solver_flags(sp)

    sp = sub.add_parser("validate", help="validation chain only; findings to stdout and disk")
    sp.add_argument("scenario", help="scenario (.ucs) or schema (.ucjson) file")
    add_engine_flags(sp)

    sp = sub.add_parser("solve", help="solve a schema file (.ucjson)")
    sp.add_argument("schema", help="schema file (.ucjson)")
    add_solver_flags(sp)

    sp = sub.add_parser("gen", help="generate instance cohorts")
    sp.add_argument("--preset", choices=("small-scale", "default", "oracle-scale"),
                    default="default")
    sp.add_argument("--out", required=True)
    sp.add_argument("--units", type=int, default=None)
    sp.add_argument("--horizon", choices=("day-hourly", "week-hourly", "month-daily"),
                    default="day-hourly")
    sp.add_argument("--runtime-seeds", default="0:10", help="a:b half-open seed range")
    sp.add_argument("--accuracy-seeds", default="10:20")
    sp.add_argument("--per-size", type=int, default=20,
                    help="instances per size bin for --preset small-scale")
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("train-policy", help="label, encode and train the branching scorer")
    sp.add_argument("--out", required=True, help="output .npz policy file")
    sp.add_argument("--instances", type=int, default=12)
    sp.add_argument("--probe-budget", type=int, default=20)
    sp.add_argument("--epochs", type=int, default=120)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("bench", help="run a cohort protocol over generated instances")
    sp.add_argument("--cohort", choices=("runtime", "accuracy"), required=True)
    sp.add_argument("--instances", required=True, help="cohort directory from `gen`")
    sp.add_argument("--jobs", type=int, default=1)
    add_solver_flags(sp)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        run_dir = _make_run_dir(args)
    except OSError as e:
        sys.stderr.write(f"error: cannot create run directory: {e}\n")
        return EXIT_CONFIG
    try:
        handler = {
            "pipeline": cmd_pipeline, "validate": cmd_validate, "solve": cmd_solve,
            "gen": cmd_gen, "train-policy": cmd_train_policy, "bench": cmd_bench,
        }[args.cmd]
        return handler(args, run_dir)
    except (OSError, ValueError, SeedOverlap, json.JSONDecodeError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_CONFIG


def _make_run_dir(args) -> Path:
    stamp = time.strftime("%Y%m%d-%H%M%S", time.gmtime())
    base = Path(args.out_root) / f"{stamp}-{args.cmd}"
    run_dir = base
    k = 1
    while run_dir.exists():
        run_dir = Path(f"{base}.{k}")
        k += 1
    run_dir.mkdir(parents=True)
    resolved = {k: (v if isinstance(v, (str, int, float, bool, type(None))) else str(v))
                for k, v in sorted(vars(args).items())}
    (run_dir / "resolved_config.json").write_text(json.dumps(resolved, indent=1, sort_keys=True) + "\n")
    (run_dir / "run_meta.json").write_text(json.dumps(
        {"created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}) + "\n")
    return run_dir


def _engine_from_args(args, run_dir: Path):
    trace_dir = run_dir / "llm-trace" if getattr(args, "trace_llm", False) else None
    return make_engine(args.engine, llm_config=args.llm_config,
                       fixture=args.replay_fixture, record=args.record_fixture,
                       trace_dir=trace_dir)


def _solver_config(args, schema, model, idx, run_dir: Path) -> SolverConfig:
    cfg = SolverConfig(time_limit=args.time_limit, gap_tolerance=args.gap_tol,
                       rng_seed=args.seed, warm_hint=commitment_hint(schema, idx),
                       dive_cols=dive_columns(idx))
    if args.seps != "off":
        engine = SimplexEngine(model)
        res = engine.solve(hint=_hint_array(cfg, model))
        diag = presolve_diagnostics(model, res, greedy_objective=None)
        if args.seps == "rule":
            cfg = replace(cfg, separator_config=configure_separators(diag, "rule-based"))
        else:
            try:
                backend = ChatBackend.from_config(getattr(args, "llm_config", None))
                cfg = replace(cfg, separator_config=configure_separators(
                    diag, "remote-chat", backend=backend))
            except (PolicyUnavailable, BackendUnavailable):
                cfg = replace(cfg, separator_config=configure_separators(diag, "rule-based"))
    if args.guidance == "on" and args.policy:
        policy = ScorerParams.load(args.policy)
        prio = bench_mod.guided_priorities(model, idx, policy)
        cfg = replace(cfg, branch_priorities=prio)
    return cfg


def _hint_array(cfg: SolverConfig, model):
    if not cfg.warm_hint:
        return None
    from .simplex import AT_LOWER, AT_UPPER
    hint = np.full(model.num_cols, -1, dtype=np.int8)
    for c, side in cfg.warm_hint.items():
        hint[int(c)] = AT_UPPER if side else AT_LOWER
    return hint


def _write_diagnostics(run_dir: Path, diags, transcript=None) -> None:
    payload = {"diagnostics": [d.to_dict() for d in diags]}
    if transcript is not None:
        payload["repair_transcript"] = transcript.to_dict()
    (run_dir / "diagnostics.json").write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def cmd_pipeline(args, run_dir: Path) -> int:
    path = Path(args.scenario)
    if not path.exists():
        sys.stderr.write(f"error: no such file {path}\n")
        return EXIT_CONFIG
    try:
        text = ScenarioText(path.read_text(), source_id=path.name)
        engine = _engine_from_args(args, run_dir)
        raw = parse_scenario(text, engine)
    except ExtractionFailed as e:
        sys.stderr.write(f"extraction failed: {e}\n")
        (run_dir / "diagnostics.json").write_text(json.dumps(
            {"stage": "extraction", "error": str(e)}) + "\n")
        return EXIT_EXTRACTION
    except BackendUnavailable as e:
        sys.stderr.write(f"backend unavailable: {e}\n")
        return EXIT_EXTRACTION

    transcript = None
    doc, schema, diags = validate_document(raw.to_dict())
    if errors_in(diags):
        try:
            schema, transcript = repair_loop(raw, engine=engine, budget=args.repair_budget)
        except RepairExhausted as e:
            _write_diagnostics(run_dir, e.diagnostics, e.transcript)
            sys.stderr.write("repair budget exhausted; findings written\n")
            return EXIT_REPAIR

    try:
        model, idx = compile_uc(schema)
    except CompileRejected as e:
        _write_diagnostics(run_dir, e.diagnostics, transcript)
        return EXIT_REPAIR

    cfg = _solver_config(args, schema, model, idx, run_dir)
    trace = open(run_dir / "solver-trace.log", "w") if args.trace_solver else None
    try:
        result = branch_and_bound(model, cfg, trace=trace)
    finally:
        if trace:
            trace.close()

    if result.status in (Status.INFEASIBLE, Status.UNBOUNDED) or result.assignment is None:
        _write_diagnostics(run_dir, [diag_error(
            Code.SOLVER_INFEASIBLE, "model",
            f"solver finished with status {result.status.value} and no schedule")],
            transcript)
        report_mod.render_report(None, result, schema, run_dir, transcript=transcript,
                                 figures=False)
        return EXIT_INFEASIBLE

    solution = extract_solution(model, idx, result.assignment, schema,
                                integrality_tol=cfg.integrality_tolerance)
    violations = post_validate(solution, schema)
    report_mod.render_report(solution, result, schema, run_dir, transcript=transcript,
                             diagnostics=violations or None,
                             figures=not args.no_figures)
    if violations:
        _write_diagnostics(run_dir, violations, transcript)
        sys.stderr.write(f"{len(violations)} post-solve violations; report written\n")
        return EXIT_POST_VALIDATE
    print(f"ok: cost {solution.total_cost!r} status {result.status.value} "
          f"gap {result.gap:.3g} -> {run_dir}")
    return EXIT_OK


def cmd_validate(args, run_dir: Path) -> int:
    path = Path(args.scenario)
    if not path.exists():
        sys.stderr.write(f"error: no such file {path}\n")
        return EXIT_CONFIG
    try:
        if path.suffix == ".ucjson":
            from .repair import schema_to_raw
            raw = schema_to_raw(UcSchema.load(path))
        else:
            engine = _engine_from_args(args, run_dir)
            raw = parse_scenario(ScenarioText(path.read_text(), source_id=path.name), engine)
    except ExtractionFailed as e:
        sys.stderr.write(f"extraction failed: {e}\n")
        return EXIT_EXTRACTION
    doc, schema, diags = validate_document(raw.to_dict())
    _write_diagnostics(run_dir, diags)
    for d in diags:
        print(f"{d.severity}: [{d.code.name}] {d.subject}: {d.message}")
    if errors_in(diags):
        print(f"{len(errors_in(diags))} errors")
        return EXIT_REPAIR
    print("schema valid")
    return EXIT_OK


def cmd_solve(args, run_dir: Path) -> int:
    path = Path(args.schema)
    if not path.exists():
        sys.stderr.write(f"error: no such file {path}\n")
        return EXIT_CONFIG
    schema = UcSchema.load(path)
    model, idx = compile_uc(schema)
    cfg = _solver_config(args, schema, model, idx, run_dir)
    trace = open(run_dir / "solver-trace.log", "w") if args.trace_solver else None
    try:
        result = branch_and_bound(model, cfg, trace=trace)
    finally:
        if trace:
            trace.close()
    if result.assignment is None:
        report_mod.render_report(None, result, schema, run_dir, figures=False)
        return EXIT_INFEASIBLE
    solution = extract_solution(model, idx, result.assignment, schema)
    violations = post_validate(solution, schema)
    report_mod.render_report(solution, result, schema, run_dir,
                             diagnostics=violations or None,
                             figures=not args.no_figures)
    if violations:
        return EXIT_POST_VALIDATE
    print(f"ok: cost {solution.total_cost!r} status {result.status.value} -> {run_dir}")
    return EXIT_OK


def _parse_range(spec: str) -> tuple[int, ...]:
    a, _, b = spec.partition(":")
    return tuple(range(int(a), int(b)))


def cmd_gen(args, run_dir: Path) -> int:
    out = Path(args.out)
    if args.preset == "small-scale":
        manifest = {"preset": "small-scale", "families": {}}
        for size, spec in small_scale_specs().items():
            sub = out / f"{size:02d}-units"
            sub.mkdir(parents=True, exist_ok=True)
            seeds = [args.seed + k for k in range(args.per_size)]
            entries = []
            for s in seeds:
                schema = gen_instance(spec, s)
                stem = f"inst-{s:06d}"
                schema.save(sub / f"{stem}.ucjson")
                (sub / f"{stem}.ucs").write_text(render_scenario(schema))
                entries.append({"seed": s, "file": f"{size:02d}-units/{stem}.ucjson"})
            manifest["families"][str(size)] = {"spec": _spec_json(spec), "instances": entries}
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
        print(f"wrote {sum(len(f['instances']) for f in manifest['families'].values())} "
              f"instances under {out}")
        return EXIT_OK
    if args.preset == "oracle-scale":
        from .instgen import oracle_scale_spec
        spec = oracle_scale_spec(args.units or 3, 5)
    else:
        units = args.units
        spec = FamilySpec(unit_count=(units, units) if units else (50, 100),
                          horizon=args.horizon, seed=args.seed)
    plan = CohortPlan(_parse_range(args.runtime_seeds), _parse_range(args.accuracy_seeds))
    manifest = gen_cohorts(plan, spec, out)
    n = sum(len(v) for v in manifest["cohorts"].values())
    print(f"wrote {n} instances under {out}")
    return EXIT_OK


def _spec_json(spec: FamilySpec) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in spec.__dict__.items()}


def cmd_train_policy(args, run_dir: Path) -> int:
    from .instgen import FamilySpec
    dataset = []
    sizes = (3, 10)
    per_size = max(1, args.instances // len(sizes))
    for size in sizes:
        spec = FamilySpec(unit_count=(size, size), horizon="day-hourly",
                          noise_std=0.02, must_run_prob=0.0, exclusive_prob=0.0,
                          class_table="smooth")
        for k in range(per_size):
            schema = gen_instance(spec, args.seed + k)
            model, idx = compile_uc(schema)
            engine = SimplexEngine(model)
            res = engine.solve()
            if res.status != "optimal":
                continue
            graph = encode_bipartite(model, res)
            labels = strong_branching_labels(model, res, probe_budget=args.probe_budget,
                                             engine=engine)
            if len(labels) >= 2:
                dataset.append((graph, labels))
    params = train_scorer(dataset, epochs=args.epochs, rng_seed=args.seed)
    params.save(args.out)
    (run_dir / "training_report.json").write_text(
        json.dumps(params.train_report, indent=1, sort_keys=True) + "\n")
    print(f"policy -> {args.out}; holdout pairwise accuracy "
          f"{params.train_report['holdout_pairwise_accuracy']:.3f} "
          f"over {int(params.train_report['holdout_pairs'])} pairs")
    return EXIT_OK


def _load_instances(root: Path) -> list[tuple[str, UcSchema]]:
    files = sorted(root.rglob("*.ucjson"))
    return [(f.stem + "@" + f.parent.name, UcSchema.load(f)) for f in files]


def cmd_bench(args, run_dir: Path) -> int:
    root = Path(args.instances)
    if not root.exists():
        sys.stderr.write(f"error: no such directory {root}\n")
        return EXIT_CONFIG
    instances = _load_instances(root)
    if not instances:
        sys.stderr.write("error: no .ucjson instances found\n")
        return EXIT_CONFIG
    sep = None
    if args.seps == "rule":
        sep = guard_config({"gomory_enabled": True, "clique_enabled": True,
                            "updown_implication_enabled": True, "max_passes": 2,
                            "aggressiveness": "normal"})
    cfg = SolverConfig(time_limit=args.time_limit, gap_tolerance=args.gap_tol,
                       rng_seed=args.seed, separator_config=sep)
    if args.cohort == "runtime":
        policy = args.policy if (args.guidance == "on" and args.policy) else None
        records, summary = bench_mod.run_runtime_cohort(instances, cfg, policy_path=policy,
                                                        jobs=args.jobs)
        files = report_mod.render_runtime_summary(records, summary, run_dir,
                                                  figures=not args.no_figures)
    else:
        records, summary = bench_mod.run_accuracy_cohort(instances, cfg, jobs=args.jobs)
        files = report_mod.render_accuracy_summary(records, summary, run_dir,
                                                   figures=not args.no_figures)
    print(json.dumps({k: v for k, v in summary.items() if k != "tau_values"},
                     indent=1, sort_keys=True))
    print(f"bundle -> {run_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
