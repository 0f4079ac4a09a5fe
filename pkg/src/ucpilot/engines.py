"""Extraction engine backends: grammar, remote chat-completion, replay fixture.

All three expose the same two capabilities: extracting a RawExtraction from
scenario text, and proposing structured repair edits for outstanding
diagnostics. The grammar backend is fully deterministic and proposes no
edits of its own; the replay backend makes recorded remote behaviour
reproducible offline.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .diagnostics import Diagnostic, Edit
from .llm import BackendUnavailable, ChatBackend, extract_json_block
from .scenario import ExtractionFailed, RawExtraction, ScenarioText, parse_grammar

EXTRACTION_PROMPT = """\
You convert power-system scheduling scenarios into a JSON object with exactly
these fields:
  generator_rows: list of objects with keys name, p_min, p_max, cost_var,
    cost_noload, cost_start, ramp_up, ramp_down, min_up, min_down,
    startup_limit, shutdown_limit, init_on, init_periods_in_state, init_power,
    merit_class (omit keys the text does not state; never invent numbers)
  demand_series: list of [period_index, value] pairs
  reserve_series: list of [period_index, value] pairs, or null
  reserve_fraction: number or null
  policy_statements: list of {kind: "must_run"|"exclusive", units: [names],
    interval: [start, end] or null}
  horizon_hint: [period_count, hours_per_period] or null
  unit_annotations: object mapping field name to unit string
  leftovers: list of sentences you could not place
Reply with the JSON object only."""

REPAIR_PROMPT = """\
You repair a unit-commitment parameter document. Given the document and a list
of validation findings, reply with a JSON list of edits, each
{"path": <subject path from a finding>, "value": <replacement value>}.
Only touch paths named by the findings. Reply with the JSON list only."""


def _fixture_key(kind: str, text: str) -> str:
    return f"{kind}:{hashlib.sha256(text.encode()).hexdigest()[:24]}"


@dataclass
class GrammarEngine:
    """Deterministic canonical-grammar front end."""

    kind: str = "grammar"

    def extract(self, text: ScenarioText) -> RawExtraction:
        return parse_grammar(text)

    def propose_repairs(self, doc: dict, diags: list[Diagnostic]) -> list[Edit]:
        return []


@dataclass
class RemoteEngine:
    """Chat-completion backend; optionally records replies into a fixture file."""

    backend: ChatBackend
    record_path: Path | None = None
    kind: str = "remote"

    def extract(self, text: ScenarioText) -> RawExtraction:
        reply = self._complete(EXTRACTION_PROMPT, text.body, _fixture_key("extract", text.body))
        payload = extract_json_block(reply)
        raw = _payload_to_extraction(payload, text.source_id)
        if raw is None:
            # one retry with the shape complaint attached
            reply = self._complete(
                EXTRACTION_PROMPT,
                text.body + "\n\nYour previous reply did not match the required shape. "
                            "Reply with the JSON object only.",
                _fixture_key("extract-retry", text.body))
            raw = _payload_to_extraction(extract_json_block(reply), text.source_id)
        if raw is None:
            raise ExtractionFailed(f"{text.source_id}: backend reply failed shape checks twice")
        return raw

    def propose_repairs(self, doc: dict, diags: list[Diagnostic]) -> list[Edit]:
        body = json.dumps({"document": doc, "findings": [d.to_dict() for d in diags]},
                          sort_keys=True)
        try:
            reply = self._complete(REPAIR_PROMPT, body, _fixture_key("repair", body))
        except BackendUnavailable:
            return []
        return _payload_to_edits(extract_json_block(reply), doc, diags)

    def _complete(self, system: str, user: str, key: str) -> str:
        reply = self.backend.complete(system, user)
        if self.record_path is not None:
            data = {}
            if self.record_path.exists():
                data = json.loads(self.record_path.read_text())
            data[key] = reply
            self.record_path.parent.mkdir(parents=True, exist_ok=True)
            self.record_path.write_text(json.dumps(data, indent=1, sort_keys=True))
        return reply


@dataclass
class ReplayEngine:
    """Replays recorded remote replies from a fixture file; fully offline."""

    fixture_path: Path
    kind: str = "replay"
    _data: dict = field(default=None, repr=False)

    def _load(self) -> dict:
        if self._data is None:
            self._data = json.loads(Path(self.fixture_path).read_text())
        return self._data

    def _lookup(self, key: str) -> str:
        data = self._load()
        if key not in data:
            raise BackendUnavailable(f"replay fixture has no entry for {key}")
        return data[key]

    def extract(self, text: ScenarioText) -> RawExtraction:
        reply = self._lookup(_fixture_key("extract", text.body))
        raw = _payload_to_extraction(extract_json_block(reply), text.source_id)
        if raw is None:
            raise ExtractionFailed(f"{text.source_id}: recorded reply failed shape checks")
        return raw

    def propose_repairs(self, doc: dict, diags: list[Diagnostic]) -> list[Edit]:
        body = json.dumps({"document": doc, "findings": [d.to_dict() for d in diags]},
                          sort_keys=True)
        try:
            reply = self._lookup(_fixture_key("repair", body))
        except BackendUnavailable:
            return []
        return _payload_to_edits(extract_json_block(reply), doc, diags)


def make_engine(kind: str, llm_config: str | None = None, fixture: str | None = None,
                record: str | None = None, trace_dir=None):
    if kind == "grammar":
        return GrammarEngine()
    if kind == "replay":
        if not fixture:
            raise ValueError("replay engine requires a fixture path")
        return ReplayEngine(Path(fixture))
    if kind == "remote":
        backend = ChatBackend.from_config(llm_config)
        if trace_dir is not None:
            backend.trace_dir = Path(trace_dir)
        return RemoteEngine(backend, Path(record) if record else None)
    raise ValueError(f"unknown engine kind {kind!r}")


def parse_scenario(text: ScenarioText, engine) -> RawExtraction:
    """Run the configured backend over one scenario.

    Grammar and replay backends are deterministic; the remote backend may
    raise BackendUnavailable. No numeric invention: absent fields stay absent.
    """
    raw = engine.extract(text)
    if not raw.generator_rows:
        raise ExtractionFailed(f"{text.source_id}: no generator table found")
    return raw


def _payload_to_extraction(payload, source_id: str) -> RawExtraction | None:
    if not isinstance(payload, dict):
        return None
    if not isinstance(payload.get("generator_rows"), list) or not payload["generator_rows"]:
        return None
    try:
        raw = RawExtraction.from_dict({**payload, "source_id": source_id})
    except (KeyError, TypeError, ValueError):
        return None
    names = {str(r.get("name")) for r in raw.generator_rows}
    for pol in raw.policy_statements:
        if any(u not in names for u in pol.units):
            pol.unresolved = True
    return raw


def _payload_to_edits(payload, doc: dict, diags: list[Diagnostic]) -> list[Edit]:
    """Shape-check proposed edits; anything not targeting a finding is dropped."""
    if not isinstance(payload, list):
        return []
    allowed = {d.subject for d in diags}
    out = []
    for item in payload:
        if not isinstance(item, dict) or "path" not in item or "value" not in item:
            continue
        path = str(item["path"])
        # an edit may target a finding's subject or a child of it
        if path not in allowed and not any(path.startswith(s + "[") or path.startswith(s + ".")
                                           for s in allowed):
            continue
        out.append(Edit(path=path, old=None, new=item["value"]))
    return out
