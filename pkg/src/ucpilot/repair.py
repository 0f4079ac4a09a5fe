"""Bounded diagnose-and-repair loop over the extraction document.

The loop re-runs the full validation chain (unit normalization, typecheck,
feasibility screens) each iteration, applies deterministic rule-based fixes
first, and consults the extraction engine only for findings no rule covers.
Every edit is recorded with before/after values.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import units as unit_table
from .diagnostics import Code, Diagnostic, Edit, error, errors_in
from .scenario import RawExtraction, normalize_units
from .schema import UcSchema, typecheck, validate_feasibility
from .units import UnknownUnit

DEFAULT_BUDGET = 5


class RepairExhausted(Exception):
    """Budget consumed with error findings outstanding; carries the transcript."""

    def __init__(self, transcript: "RepairTranscript", schema: UcSchema | None,
                 diagnostics: list[Diagnostic]):
        self.transcript = transcript
        self.schema = schema
        self.diagnostics = diagnostics
        super().__init__(f"repair budget exhausted with {len(errors_in(diagnostics))} errors outstanding")


@dataclass
class RepairIteration:
    diagnostics_in: list[Diagnostic]
    edits: list[Edit]
    errors_after: int

    def to_dict(self) -> dict:
        return {"diagnostics_in": [d.to_dict() for d in self.diagnostics_in],
                "edits": [e.to_dict() for e in self.edits],
                "errors_after": self.errors_after}


@dataclass
class RepairTranscript:
    budget: int
    iterations: list[RepairIteration] = field(default_factory=list)
    outcome: str = "repaired"     # repaired | exhausted | unrepairable

    def to_dict(self) -> dict:
        return {"budget": self.budget, "outcome": self.outcome,
                "iterations": [it.to_dict() for it in self.iterations]}


def normalize_checked(raw: RawExtraction) -> tuple[RawExtraction, list[Diagnostic]]:
    """normalize_units that reports unknown annotations as findings.

    Fields with bad annotations are left unconverted; everything else is
    normalized. An unambiguous case-variant of a supported unit becomes a
    suggested fix.
    """
    diags: list[Diagnostic] = []
    doc = raw.to_dict()
    bad = {}
    for fld, unit in list(doc["unit_annotations"].items()):
        try:
            unit_table.factor(fld, unit)
        except UnknownUnit:
            alias = unit_table.alias_of(unit, fld)
            fix = Edit(f"unit_annotations.{fld}", unit, alias) if alias else None
            diags.append(error(Code.UNIT_ERROR, f"unit_annotations.{fld}",
                               f"unsupported unit {unit!r} on {fld}"
                               + (f" (did you mean {alias!r}?)" if alias else ""),
                               fix=fix))
            bad[fld] = doc["unit_annotations"].pop(fld)
    cleaned = RawExtraction.from_dict(doc)
    normalized = normalize_units(cleaned)
    normalized.unit_annotations.update(bad)
    return normalized, diags


def validate_document(doc: dict) -> tuple[dict, UcSchema | None, list[Diagnostic]]:
    """Full validation chain on an extraction document (canonical-unit form out)."""
    raw = RawExtraction.from_dict(doc)
    normalized, diags = normalize_checked(raw)
    schema, tdiags = typecheck(normalized)
    diags.extend(tdiags)
    if schema is not None:
        diags.extend(validate_feasibility(schema))
    return normalized.to_dict(), schema, diags


def schema_to_raw(s: UcSchema) -> RawExtraction:
    """Lossless projection of a schema back into extraction-document form."""
    from dataclasses import asdict
    rows = [asdict(g) for g in s.generators]
    policies = []
    for gi, (a, b) in s.must_run:
        policies.append({"kind": "must_run", "units": [s.generators[gi].name],
                         "interval": [a, b], "unresolved": False, "text": ""})
    for group in s.exclusive_groups:
        policies.append({"kind": "exclusive",
                         "units": [s.generators[i].name for i in group],
                         "interval": None, "unresolved": False, "text": ""})
    return RawExtraction.from_dict({
        "generator_rows": rows,
        "demand_series": [[t, v] for t, v in enumerate(s.demand)],
        "reserve_series": [[t, v] for t, v in enumerate(s.reserve)],
        "reserve_fraction": None,
        "policy_statements": policies,
        "horizon_hint": [s.horizon, s.period_hours],
        "unit_annotations": {},
        "leftovers": [],
        "source_id": "schema",
    })


def repair_loop(target, engine=None, budget: int = DEFAULT_BUDGET
                ) -> tuple[UcSchema, RepairTranscript]:
    """Iterate diagnose-fix rounds until clean or the budget is consumed.

    `target` is a RawExtraction or a UcSchema. On success returns the
    repaired schema and the transcript; on failure raises RepairExhausted
    carrying the transcript, the last schema (possibly None) and all
    outstanding findings.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if isinstance(target, UcSchema):
        doc = schema_to_raw(target).to_dict()
    elif isinstance(target, RawExtraction):
        doc = target.to_dict()
    else:
        doc = dict(target)

    transcript = RepairTranscript(budget=budget)
    schema, diags = None, []
    for _ in range(budget):
        doc, schema, diags = validate_document(doc)
        errs = errors_in(diags)
        if not errs:
            transcript.outcome = "repaired"
            return schema, transcript

        edits = _rule_edits(errs)
        covered = {e.path for e in edits}
        remaining = [d for d in errs if d.subject not in covered]
        if engine is not None and remaining:
            for e in engine.propose_repairs(doc, remaining):
                if e.path not in covered:
                    edits.append(e)
                    covered.add(e.path)
        applied = []
        for e in edits:
            done = apply_edit(doc, e)
            if done is not None:
                applied.append(done)
        _, _, post = validate_document(dict(doc))
        transcript.iterations.append(RepairIteration(errs, applied, len(errors_in(post))))

    doc, schema, diags = validate_document(doc)
    errs = errors_in(diags)
    if not errs:
        transcript.outcome = "repaired"
        return schema, transcript
    transcript.outcome = "exhausted" if schema is not None else "unrepairable"
    raise RepairExhausted(transcript, schema, diags)


def _rule_edits(errs: list[Diagnostic]) -> list[Edit]:
    """One deterministic edit per subject: highest severity, lowest code wins."""
    by_path: dict[str, Diagnostic] = {}
    for d in errs:
        if d.suggested_fix is None:
            continue
        cur = by_path.get(d.suggested_fix.path)
        if cur is None or d.code < cur.code:
            by_path[d.suggested_fix.path] = d
    return [by_path[p].suggested_fix for p in sorted(by_path)]


def _parse_path(path: str) -> list:
    """'generators[2].p_min' -> ['generators', 2, 'p_min']"""
    parts: list = []
    for chunk in path.split("."):
        while "[" in chunk:
            head, _, rest = chunk.partition("[")
            idx, _, chunk = rest.partition("]")
            if head:
                parts.append(head)
            parts.append(int(idx))
            if chunk.startswith("."):
                chunk = chunk[1:]
        if chunk:
            parts.append(chunk)
    return parts


def apply_edit(doc: dict, edit: Edit) -> Edit | None:
    """Apply one edit to the extraction document; returns it with the real
    before-value filled in, or None when the path cannot be applied."""
    parts = _parse_path(edit.path)
    try:
        head = parts[0]
        if head == "generators":
            row = doc["generator_rows"][parts[1]]
            if len(parts) == 2:
                if not isinstance(edit.new, dict):
                    # paired swap encoded as [old_pair, new_pair] on p_min/p_max
                    if edit.new is None:
                        old = dict(row)
                        doc["generator_rows"].pop(parts[1])
                        return Edit(edit.path, old, None)
                    return None
                old = {k: row.get(k) for k in edit.new}
                row.update(edit.new)
                return Edit(edit.path, old, dict(edit.new))
            fld = parts[2]
            old = row.get(fld)
            row[fld] = edit.new
            return Edit(edit.path, old, edit.new)
        if head == "demand" or head == "reserve":
            key = "demand_series" if head == "demand" else "reserve_series"
            if doc.get(key) is None:
                doc[key] = []
            series = doc[key]
            if len(parts) == 1:
                if not isinstance(edit.new, list):
                    return None
                old = [list(p) for p in series]
                doc[key] = [[t, float(v)] for t, v in enumerate(edit.new)]
                return Edit(edit.path, old, doc[key])
            t = parts[1]
            for pair in series:
                if pair[0] == t:
                    old = pair[1]
                    pair[1] = float(edit.new)
                    return Edit(edit.path, old, pair[1])
            series.append([t, float(edit.new)])
            series.sort(key=lambda p: p[0])
            return Edit(edit.path, None, float(edit.new))
        if head == "reserve_fraction":
            old = doc.get("reserve_fraction")
            doc["reserve_fraction"] = edit.new
            return Edit(edit.path, old, edit.new)
        if head == "must_run":
            k = parts[1]
            idx = -1
            for pol in doc["policy_statements"]:
                if pol["kind"] == "must_run" and not pol.get("unresolved"):
                    idx += 1
                    if idx == k:
                        old = list(pol["interval"])
                        pol["interval"] = [int(edit.new[0]), int(edit.new[1])]
                        return Edit(edit.path, old, list(pol["interval"]))
            return None
        if head == "policy_statements":
            k = parts[1]
            if k >= len(doc["policy_statements"]):
                return None
            old = doc["policy_statements"][k]
            if edit.new is None:
                doc["policy_statements"].pop(k)
                return Edit(edit.path, old, None)
            doc["policy_statements"][k] = edit.new
            return Edit(edit.path, old, edit.new)
        if head == "horizon":
            if doc.get("horizon_hint") is None:
                doc["horizon_hint"] = [int(edit.new), 1.0]
                return Edit(edit.path, None, int(edit.new))
            old = doc["horizon_hint"][0]
            doc["horizon_hint"][0] = int(edit.new)
            return Edit(edit.path, old, int(edit.new))
        if head == "period_hours":
            if doc.get("horizon_hint") is None:
                return None
            old = doc["horizon_hint"][1]
            doc["horizon_hint"][1] = float(edit.new)
            return Edit(edit.path, old, float(edit.new))
        if head == "unit_annotations":
            fld = parts[1]
            old = doc["unit_annotations"].get(fld)
            if edit.new is None:
                doc["unit_annotations"].pop(fld, None)
            else:
                doc["unit_annotations"][fld] = edit.new
            return Edit(edit.path, old, edit.new)
    except (KeyError, IndexError, TypeError, ValueError):
        return None
    return None
