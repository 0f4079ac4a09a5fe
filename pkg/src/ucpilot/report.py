"""Report bundles: deterministic JSON + text alongside figures and timings.

Numbers in report.json and schedule.txt come from the same canonically
rounded solution object, so they agree to the byte. Wall-clock quantities
live in timings.json only, keeping the main report reproducible bit-for-bit
across reruns with identical seeds.
"""
from __future__ import annotations

import json
from pathlib import Path

from . import plots
from .compiler import UcSolution, solution_table
from .milp import SolveResult


def _dump(path: Path, obj) -> str:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")
    return str(path)


def render_report(solution: UcSolution | None, result: SolveResult, schema,
                  out_dir, transcript=None, diagnostics=None,
                  figures: bool = True) -> dict:
    """Write the report bundle for one solve; returns the file map."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {}

    solver_section = result.to_dict()
    wall = solver_section.pop("wall_time")
    report = {"solver": solver_section}
    if solution is not None:
        report["solution"] = solution.to_dict()
    if transcript is not None:
        report["repair_transcript"] = transcript.to_dict()
    if diagnostics:
        report["diagnostics"] = [d.to_dict() for d in diagnostics]
    files["report"] = _dump(out / "report.json", report)
    files["timings"] = _dump(out / "timings.json", {"solve_wall_time": wall})

    if solution is not None:
        (out / "schedule.txt").write_text(solution_table(solution, schema))
        files["schedule"] = str(out / "schedule.txt")
        if figures:
            fig_dir = out / "figures"
            fig_dir.mkdir(exist_ok=True)
            files["commitment_heatmap"] = plots.commitment_heatmap(
                solution, schema, fig_dir / "commitment.png")
            files["dispatch_stack"] = plots.dispatch_stack(
                solution, schema, fig_dir / "dispatch.png")
    return files


def render_runtime_summary(records, summary, out_dir, figures: bool = True) -> dict:
    """Cohort bundle: summary JSON, per-instance CSV, tau histogram."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"summary": _dump(out / "runtime_summary.json", summary)}
    csv_path = out / "runtime_records.csv"
    header = ("instance_id,t_default,t_guided,tau,status_default,status_guided,"
              "timed_out_default,timed_out_guided,objective_default,objective_guided,"
              "gap_default,gap_guided,model_hash")
    lines = [header]
    for r in records:
        lines.append(",".join(str(v) for v in (
            r.instance_id, r.t_default, r.t_guided, r.tau, r.status_default,
            r.status_guided, int(r.timed_out_default), int(r.timed_out_guided),
            r.objective_default, r.objective_guided, r.gap_default, r.gap_guided,
            r.model_hash)))
    csv_path.write_text("\n".join(lines) + "\n")
    files["records"] = str(csv_path)
    if figures:
        files["tau_histogram"] = plots.tau_histogram(
            [r.tau for r in records], out / "tau_histogram.png")
    return files


def render_accuracy_summary(records, summary, out_dir, figures: bool = True) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"summary": _dump(out / "accuracy_summary.json", summary)}
    csv_path = out / "accuracy_records.csv"
    header = ("instance_id,units,gap_expert,gap_generated,feasible_expert,"
              "feasible_generated,validation_failure")
    lines = [header]
    for r in records:
        lines.append(",".join(str(v) for v in (
            r.instance_id, r.units, r.gap_expert, r.gap_generated,
            int(r.feasible_expert), int(r.feasible_generated), int(r.validation_failure))))
    csv_path.write_text("\n".join(lines) + "\n")
    files["records"] = str(csv_path)
    if figures:
        by_bin: dict[int, list] = {}
        for r in records:
            if not r.validation_failure:
                by_bin.setdefault(r.units, []).append(r.gap_generated)
        if by_bin:
            files["gap_box"] = plots.gap_box(by_bin, out / "gap_box.png")
    return files
