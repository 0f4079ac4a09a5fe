import pytest

from ucpilot.diagnostics import Code, errors_in
from ucpilot.scenario import RawExtraction, ScenarioText, parse_grammar
from ucpilot.schema import GeneratorSpec, UcSchema, typecheck, validate_feasibility


def _raw(**overrides):
    base = {
        "generator_rows": [
            {"name": "G1", "p_min": 10.0, "p_max": 50.0, "cost_var": 10.0,
             "ramp_up": 50.0, "ramp_down": 50.0},
            {"name": "G2", "p_min": 10.0, "p_max": 100.0, "cost_var": 20.0,
             "ramp_up": 100.0, "ramp_down": 100.0},
            {"name": "G3", "p_min": 5.0, "p_max": 80.0, "cost_var": 30.0,
             "ramp_up": 80.0, "ramp_down": 80.0},
        ],
        "demand_series": [[t, 100.0 + t] for t in range(24)],
        "reserve_series": None,
        "reserve_fraction": 0.1,
        "policy_statements": [],
        "horizon_hint": [24, 1.0],
        "unit_annotations": {},
        "leftovers": [],
    }
    base.update(overrides)
    return RawExtraction.from_dict(base)


def test_typecheck_fixture(fixture_scenario_text):
    raw = parse_grammar(ScenarioText(fixture_scenario_text, "tc"))
    schema, diags = typecheck(raw)
    assert schema is not None
    assert schema.n_units == 3
    assert schema.horizon == 24
    assert len(schema.demand) == 24
    assert not errors_in(diags)


def test_defaults_emit_warnings():
    schema, diags = typecheck(_raw())
    assert schema is not None
    warned_fields = {d.subject.rsplit(".", 1)[-1] for d in diags
                     if d.code == Code.MISSING_FIELD and not d.is_error}
    # absent optional fields default conservatively, each with a warning
    assert {"cost_noload", "cost_start", "min_up", "min_down",
            "startup_limit", "shutdown_limit"} <= warned_fields


def test_shape_mismatch_demand_too_short():
    schema, diags = typecheck(_raw(demand_series=[[t, 100.0] for t in range(23)]))
    assert schema is None
    codes = {d.code for d in errors_in(diags)}
    assert Code.SHAPE_MISMATCH in codes


def test_bound_order_error():
    raw = _raw()
    raw.generator_rows[1]["p_min"] = 60.0
    raw.generator_rows[1]["p_max"] = 50.0
    schema, diags = typecheck(raw)
    errs = [d for d in errors_in(diags) if d.code == Code.BOUND_ORDER]
    assert errs and errs[0].subject == "generators[1]"
    assert errs[0].suggested_fix is not None


def test_reserve_fraction_expands_to_series():
    schema, _ = typecheck(_raw())
    assert schema.reserve == [pytest.approx(0.1 * d) for d in schema.demand]


def test_reserve_series_wins_over_fraction():
    raw = _raw(reserve_series=[[t, 5.0] for t in range(24)])
    schema, diags = typecheck(raw)
    assert schema.reserve == [5.0] * 24
    assert any(d.subject == "reserve" and not d.is_error for d in diags)


class TestValidateFeasibility:
    def test_capacity_shortfall(self):
        raw = _raw(demand_series=[[t, 500.0] for t in range(24)], reserve_fraction=0.1)
        schema, diags = typecheck(raw)
        diags = validate_feasibility(schema)
        shortfalls = [d for d in diags if d.code == Code.CAPACITY_SHORTFALL]
        assert len(shortfalls) == 24  # 230 total p_max < 550 everywhere

    def test_exclusive_must_run_conflict(self):
        raw = _raw()
        schema, _ = typecheck(raw)
        schema.exclusive_groups = [[0, 1]]
        schema.must_run = [(0, (3, 6)), (1, (5, 8))]
        diags = validate_feasibility(schema)
        assert any(d.code == Code.EXCLUSIVE_MUST_RUN_CONFLICT for d in diags)

    def test_zero_demand_is_clean(self):
        raw = _raw(demand_series=[[t, 0.0] for t in range(24)], reserve_fraction=0.0)
        schema, _ = typecheck(raw)
        assert validate_feasibility(schema) == []

    def test_fleet_ramp_infeasible(self):
        demand = [[t, 100.0] for t in range(24)]
        demand[12][1] = 10000.0
        raw = _raw(demand_series=demand, reserve_fraction=0.0)
        schema, diags = typecheck(raw)
        if schema is None:
            pytest.fail("schema should build")
        diags = validate_feasibility(schema)
        assert any(d.code == Code.RAMP_INFEASIBLE and d.is_error for d in diags)
        assert any(d.code == Code.CAPACITY_SHORTFALL for d in diags)


def test_ucjson_round_trip(tmp_path, toy_schema):
    path = tmp_path / "toy.ucjson"
    toy_schema.save(path)
    loaded = UcSchema.load(path)
    assert loaded == toy_schema
