import json

import pytest

from ucpilot.diagnostics import Code, errors_in
from ucpilot.engines import GrammarEngine, ReplayEngine, _fixture_key
from ucpilot.repair import (RepairExhausted, repair_loop, schema_to_raw,
                            validate_document)
from ucpilot.scenario import RawExtraction, ScenarioText, parse_grammar


def _raw_dict(**overrides):
    base = {
        "generator_rows": [
            {"name": "G1", "p_min": 10.0, "p_max": 50.0, "cost_var": 10.0,
             "ramp_up": 50.0, "ramp_down": 50.0, "min_up": 1, "min_down": 1,
             "cost_noload": 0.0, "cost_start": 0.0, "startup_limit": 10.0,
             "shutdown_limit": 10.0, "init_on": False,
             "init_periods_in_state": 1, "init_power": 0.0,
             "merit_class": "mid-merit"},
            {"name": "G2", "p_min": 10.0, "p_max": 100.0, "cost_var": 20.0,
             "ramp_up": 100.0, "ramp_down": 100.0, "min_up": 1, "min_down": 1,
             "cost_noload": 0.0, "cost_start": 0.0, "startup_limit": 10.0,
             "shutdown_limit": 10.0, "init_on": False,
             "init_periods_in_state": 1, "init_power": 0.0,
             "merit_class": "mid-merit"},
        ],
        "demand_series": [[t, 60.0] for t in range(6)],
        "reserve_series": None,
        "reserve_fraction": 0.0,
        "policy_statements": [],
        "horizon_hint": [6, 1.0],
        "unit_annotations": {},
        "leftovers": [],
    }
    base.update(overrides)
    return base


def test_bound_order_repaired_in_one_iteration():
    doc = _raw_dict()
    doc["generator_rows"][0]["p_min"] = 60.0
    doc["generator_rows"][0]["p_max"] = 50.0
    schema, transcript = repair_loop(RawExtraction.from_dict(doc))
    assert transcript.outcome == "repaired"
    # the swap itself lands in iteration 1; dependent range fixes may follow
    first = transcript.iterations[0]
    assert any(e.path == "generators[0]" for e in first.edits)
    assert schema.generators[0].p_min < schema.generators[0].p_max


def test_interval_truncated():
    doc = _raw_dict(policy_statements=[{"kind": "must_run", "units": ["G1"],
                                        "interval": [2, 99], "unresolved": False,
                                        "text": ""}])
    schema, transcript = repair_loop(RawExtraction.from_dict(doc))
    assert transcript.outcome == "repaired"
    assert schema.must_run == [(0, (2, 5))]


def test_unresolved_policy_dropped():
    doc = _raw_dict(policy_statements=[{"kind": "must_run", "units": ["G9"],
                                        "interval": [0, 2], "unresolved": True,
                                        "text": "Unit G9 must run"}])
    schema, transcript = repair_loop(RawExtraction.from_dict(doc))
    assert transcript.outcome == "repaired"
    assert schema.must_run == []


def test_unit_alias_repaired():
    doc = _raw_dict(unit_annotations={"p_max": "mw"})
    schema, transcript = repair_loop(RawExtraction.from_dict(doc))
    assert transcript.outcome == "repaired"
    assert schema.generators[0].p_max == 50.0


def test_capacity_shortfall_exhausts_budget():
    doc = _raw_dict(demand_series=[[t, 500.0] for t in range(6)])
    with pytest.raises(RepairExhausted) as ei:
        repair_loop(RawExtraction.from_dict(doc), budget=5)
    tr = ei.value.transcript
    assert tr.outcome == "exhausted"
    assert len(tr.iterations) == 5
    assert any(d.code == Code.CAPACITY_SHORTFALL for d in ei.value.diagnostics)


def test_budget_cap_respected():
    doc = _raw_dict(demand_series=[[t, 500.0] for t in range(6)])
    for budget in (1, 3):
        with pytest.raises(RepairExhausted) as ei:
            repair_loop(RawExtraction.from_dict(doc), budget=budget)
        assert len(ei.value.transcript.iterations) <= budget


def test_monotone_error_count_rule_based():
    doc = _raw_dict()
    doc["generator_rows"][0]["p_min"] = 60.0
    doc["generator_rows"][0]["p_max"] = 50.0
    doc["generator_rows"][1]["cost_var"] = -5.0
    doc["policy_statements"] = [{"kind": "must_run", "units": ["G1"],
                                 "interval": [-1, 99], "unresolved": False, "text": ""}]
    schema, transcript = repair_loop(RawExtraction.from_dict(doc))
    counts = [len(it.diagnostics_in) for it in transcript.iterations]
    assert counts == sorted(counts, reverse=True)
    assert transcript.outcome == "repaired"


def test_edits_touch_only_their_subject():
    doc = _raw_dict()
    doc["generator_rows"][0]["cost_var"] = -3.0
    schema, transcript = repair_loop(RawExtraction.from_dict(doc))
    for it in transcript.iterations:
        subjects = {d.suggested_fix.path for d in it.diagnostics_in if d.suggested_fix}
        for e in it.edits:
            assert e.path in subjects


def test_replay_engine_fills_missing_demand(tmp_path):
    doc = _raw_dict(demand_series=[[t, 60.0] for t in range(5)])  # one trailing value lost
    raw = RawExtraction.from_dict(doc)
    _, schema0, diags = validate_document(raw.to_dict())
    errs = errors_in(diags)
    assert errs and errs[0].subject == "demand"

    # author the fixture reply alongside: the engine proposes the missing value
    doc_norm, _, diags2 = validate_document(raw.to_dict())
    body = json.dumps({"document": doc_norm,
                       "findings": [d.to_dict() for d in errors_in(diags2)]},
                      sort_keys=True)
    fixture = {_fixture_key("repair", body): json.dumps([{"path": "demand[5]", "value": 60.0}])}
    fpath = tmp_path / "repair.json"
    fpath.write_text(json.dumps(fixture))

    schema, transcript = repair_loop(raw, engine=ReplayEngine(fpath), budget=5)
    assert transcript.outcome == "repaired"
    assert len(transcript.iterations) == 1
    assert [e.to_dict() for e in transcript.iterations[0].edits] == [
        {"path": "demand[5]", "old": None, "new": 60.0}]
    assert schema.demand[5] == 60.0


def test_schema_round_trip_through_raw(toy_schema):
    raw = schema_to_raw(toy_schema)
    _, schema, diags = validate_document(raw.to_dict())
    assert not errors_in(diags)
    assert schema == toy_schema
