import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ucpilot.schema import GeneratorSpec, UcSchema


@pytest.fixture
def toy_schema():
    """2-unit, 3-period instance with a hand-checkable optimum of 2800."""
    gens = [
        GeneratorSpec("A", 10, 50, 10.0, ramp_up=100, ramp_down=100,
                      startup_limit=50, shutdown_limit=50,
                      init_periods_in_state=1),
        GeneratorSpec("B", 10, 100, 20.0, cost_start=100.0, ramp_up=200,
                      ramp_down=200, startup_limit=100, shutdown_limit=100,
                      init_periods_in_state=1),
    ]
    return UcSchema(gens, 3, 1.0, [40.0, 120.0, 40.0], [0.0, 0.0, 0.0])


@pytest.fixture
def fixture_scenario_text():
    """3 generators, 24 hourly demand points, one must-run policy."""
    demand = [300 + 40 * ((t % 12) - 6) / 6 for t in range(24)]
    lines = [
        "HORIZON: 24 hourly",
        "GENERATORS:",
        "name class pmin pmax cost_var cost_noload cost_start ramp_up ramp_down "
        "min_up min_down startup_limit shutdown_limit init_on init_periods init_power",
        "G1 base-load 80.0 200.0 15.0 50.0 500.0 100.0 100.0 4 4 90.0 90.0 on 4 150.0",
        "G2 mid-merit 30.0 120.0 30.0 20.0 200.0 80.0 80.0 2 2 40.0 40.0 off 2 0.0",
        "G3 peaker 5.0 60.0 80.0 5.0 50.0 60.0 60.0 1 1 60.0 60.0 off 1 0.0",
        "DEMAND:",
    ]
    lines += [f"{t}: {v!r}" for t, v in enumerate(demand)]
    lines += ["RESERVE:", "0.05", "POLICIES:",
              "Unit G1 must run from hour 5 to hour 10."]
    return "\n".join(lines) + "\n"
