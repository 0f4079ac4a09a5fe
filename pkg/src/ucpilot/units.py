"""Unit annotation table and conversion to canonical units.

Canonical units: power MW, energy MWh, variable cost $/MWh, no-load cost $/h,
event cost $, time h. Conversion factors are exact.
"""
from __future__ import annotations


class UnknownUnit(Exception):
    """Annotation is not in the supported unit table."""

    def __init__(self, unit: str, field: str = ""):
        self.unit = unit
        self.field = field
        super().__init__(f"unknown unit {unit!r}" + (f" on {field}" if field else ""))


# dimension -> {annotation: factor to canonical}
POWER = {"MW": 1.0, "kW": 1e-3, "GW": 1e3}
ENERGY = {"MWh": 1.0}
ENERGY_PRICE = {"$/MWh": 1.0, "$/kWh": 1e3}
MONEY = {"$": 1.0}
HOURLY_PRICE = {"$/h": 1.0}
TIME = {"h": 1.0, "min": 1.0 / 60.0}

CANONICAL = {"power": "MW", "energy": "MWh", "energy_price": "$/MWh",
             "money": "$", "hourly_price": "$/h", "time": "h"}

_TABLES = {"power": POWER, "energy": ENERGY, "energy_price": ENERGY_PRICE,
           "money": MONEY, "hourly_price": HOURLY_PRICE, "time": TIME}

# schema field -> dimension; fields absent here carry no unit (counts, flags)
FIELD_DIMENSION = {
    "p_min": "power",
    "p_max": "power",
    "ramp_up": "power",
    "ramp_down": "power",
    "startup_limit": "power",
    "shutdown_limit": "power",
    "init_power": "power",
    "demand": "power",
    "reserve": "power",
    "cost_var": "energy_price",
    "cost_noload": "hourly_price",
    "cost_start": "money",
    "min_up": "time",
    "min_down": "time",
    "period_hours": "time",
}

SUPPORTED = sorted({u for t in _TABLES.values() for u in t})


def factor(field: str, unit: str) -> float:
    """Exact conversion factor from `unit` to the canonical unit of `field`.

    Raises UnknownUnit when the annotation is not in the table for the
    field's dimension (matching is case-sensitive; aliases are a repair
    concern, not a conversion concern).
    """
    dim = FIELD_DIMENSION.get(field)
    if dim is None:
        raise UnknownUnit(unit, field)
    table = _TABLES[dim]
    if unit not in table:
        raise UnknownUnit(unit, field)
    return table[unit]


def canonical_for(field: str) -> str | None:
    dim = FIELD_DIMENSION.get(field)
    return CANONICAL[dim] if dim else None


def alias_of(unit: str, field: str) -> str | None:
    """Case-insensitive resolution of a miswritten annotation, if unambiguous."""
    dim = FIELD_DIMENSION.get(field)
    if dim is None:
        return None
    matches = [u for u in _TABLES[dim] if u.lower() == unit.lower()]
    return matches[0] if len(matches) == 1 else None
