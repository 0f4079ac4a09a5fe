"""Canonical scenario grammar (.ucs): parsing, rendering and unit normalization.

A scenario file is line-oriented with five sections::

    HORIZON: 24 hourly
    GENERATORS:
    name class pmin pmax cost_var ...   (header row; columns may carry [unit])
    G1   base-load 50 150 18.5 ...
    DEMAND:
    0: 312.5                            (or a single comma-separated series)
    RESERVE:
    0.1                                 (single bare number = fraction of demand)
    POLICIES:
    Unit G1 must run from period 5 to period 10.
    Units G2 and G3 are mutually exclusive.

The full EBNF lives in docs/scenario_grammar.md. Parsing is deterministic and
never invents values: unrecognized lines land in `leftovers`, absent fields
stay absent.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from . import units as unit_table
from .units import UnknownUnit


class ExtractionFailed(Exception):
    """The scenario yields no usable generator table (or the backend reply is unusable)."""


@dataclass(frozen=True)
class ScenarioText:
    body: str
    source_id: str = "inline"

    def __post_init__(self):
        if not self.body.strip():
            raise ExtractionFailed(f"{self.source_id}: empty scenario body")


@dataclass
class PolicyStatement:
    kind: str                       # "must_run" | "exclusive"
    units: list[str]
    interval: tuple[int, int] | None = None   # inclusive [start, end], must_run only
    unresolved: bool = False
    text: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "units": list(self.units),
                "interval": list(self.interval) if self.interval else None,
                "unresolved": self.unresolved, "text": self.text}


@dataclass
class RawExtraction:
    """Pre-typed extraction: exactly what the text said, in canonical sections."""

    generator_rows: list[dict] = field(default_factory=list)
    demand_series: list[tuple[int, float]] = field(default_factory=list)
    reserve_series: list[tuple[int, float]] | None = None
    reserve_fraction: float | None = None
    policy_statements: list[PolicyStatement] = field(default_factory=list)
    horizon_hint: tuple[int, float] | None = None    # (periods, hours per period)
    unit_annotations: dict = field(default_factory=dict)
    leftovers: list[str] = field(default_factory=list)
    source_id: str = "inline"

    def to_dict(self) -> dict:
        return {
            "generator_rows": [dict(r) for r in self.generator_rows],
            "demand_series": [list(p) for p in self.demand_series],
            "reserve_series": [list(p) for p in self.reserve_series] if self.reserve_series is not None else None,
            "reserve_fraction": self.reserve_fraction,
            "policy_statements": [p.to_dict() for p in self.policy_statements],
            "horizon_hint": list(self.horizon_hint) if self.horizon_hint else None,
            "unit_annotations": dict(self.unit_annotations),
            "leftovers": list(self.leftovers),
            "source_id": self.source_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RawExtraction":
        pols = [PolicyStatement(p["kind"], list(p["units"]),
                                tuple(p["interval"]) if p.get("interval") else None,
                                bool(p.get("unresolved", False)), p.get("text", ""))
                for p in d.get("policy_statements", [])]
        rs = d.get("reserve_series")
        return cls(
            generator_rows=[dict(r) for r in d.get("generator_rows", [])],
            demand_series=[(int(t), float(v)) for t, v in d.get("demand_series", [])],
            reserve_series=[(int(t), float(v)) for t, v in rs] if rs is not None else None,
            reserve_fraction=d.get("reserve_fraction"),
            policy_statements=pols,
            horizon_hint=tuple(d["horizon_hint"]) if d.get("horizon_hint") else None,
            unit_annotations=dict(d.get("unit_annotations", {})),
            leftovers=list(d.get("leftovers", [])),
            source_id=d.get("source_id", "inline"),
        )


_SECTION_RE = re.compile(r"^(HORIZON|GENERATORS|DEMAND|RESERVE|POLICIES)(?:\[([^\]]+)\])?\s*:\s*(.*)$",
                         re.IGNORECASE)
_HEADER_UNIT_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)(?:\[([^\]]+)\])?$")
_MUST_RUN_RE = re.compile(
    r"^unit\s+(\S+)\s+must\s+run\s+from\s+(?:hour\s+|period\s+|day\s+)?(\d+)\s+to\s+(?:hour\s+|period\s+|day\s+)?(\d+)\s*\.?$",
    re.IGNORECASE)
_EXCLUSIVE_RE = re.compile(
    r"^units\s+(.+?)\s+are\s+mutually\s+exclusive\s*\.?$", re.IGNORECASE)
_HORIZON_RE = re.compile(
    r"^(\d+)\s*(hourly|daily|periods?\s+of\s+([0-9.]+)\s*(h|min))$", re.IGNORECASE)

GENERATOR_FIELDS = [
    "name", "merit_class", "p_min", "p_max", "cost_var", "cost_noload",
    "cost_start", "ramp_up", "ramp_down", "min_up", "min_down",
    "startup_limit", "shutdown_limit", "init_on", "init_periods_in_state",
    "init_power",
]

_HEADER_ALIASES = {
    "pmin": "p_min", "pmax": "p_max", "class": "merit_class",
    "init_periods": "init_periods_in_state", "rampup": "ramp_up",
    "rampdown": "ramp_down", "minup": "min_up", "mindown": "min_down",
}


def _parse_number(tok: str) -> float | None:
    try:
        return float(tok)
    except ValueError:
        return None


def _parse_bool(tok: str) -> bool | None:
    t = tok.lower()
    if t in ("on", "true", "1", "yes"):
        return True
    if t in ("off", "false", "0", "no"):
        return False
    return None


def _split_name_list(blob: str) -> list[str]:
    # "G1, G2 and G3" -> [G1, G2, G3]
    blob = blob.replace(",", " ").replace(" and ", " ")
    return [t for t in blob.split() if t]


def parse_grammar(text: ScenarioText) -> RawExtraction:
    """Deterministic parse of the canonical grammar. Pure function of the text."""
    raw = RawExtraction(source_id=text.source_id)
    section = None
    header: list[str] = []
    known_names: set[str] = set()

    for lineno, line in enumerate(text.body.splitlines()):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _SECTION_RE.match(stripped)
        if m:
            section = m.group(1).upper()
            sec_unit = m.group(2)
            rest = m.group(3).strip()
            if sec_unit:
                raw.unit_annotations[section.lower()] = sec_unit
            if rest:
                _consume_line(raw, section, header, known_names, rest, lineno)
            continue
        if section is None:
            raw.leftovers.append(stripped)
            continue
        if section == "GENERATORS" and not header:
            ok = _parse_gen_header(raw, header, stripped)
            if not ok:
                raw.leftovers.append(stripped)
            continue
        _consume_line(raw, section, header, known_names, stripped, lineno)

    if not raw.generator_rows:
        raise ExtractionFailed(f"{text.source_id}: no generator table found")

    known_names = {str(r.get("name")) for r in raw.generator_rows}
    for pol in raw.policy_statements:
        if any(u not in known_names for u in pol.units):
            pol.unresolved = True
    return raw


def _parse_gen_header(raw: RawExtraction, header: list[str], line: str) -> bool:
    cols = []
    for tok in re.split(r"[|\s]+", line.strip()):
        if not tok:
            continue
        m = _HEADER_UNIT_RE.match(tok)
        if not m:
            return False
        name = _HEADER_ALIASES.get(m.group(1).lower(), m.group(1).lower())
        cols.append(name)
        if m.group(2):
            raw.unit_annotations[name] = m.group(2)
    if "name" not in cols:
        return False
    header.extend(cols)
    return True


def _consume_line(raw: RawExtraction, section: str, header: list[str],
                  known_names: set, line: str, lineno: int) -> None:
    if section == "HORIZON":
        m = _HORIZON_RE.match(line)
        if not m:
            raw.leftovers.append(line)
            return
        count = int(m.group(1))
        word = m.group(2).lower()
        if word == "hourly":
            hours = 1.0
        elif word == "daily":
            hours = 24.0
        else:
            hours = float(m.group(3))
            if m.group(4).lower() == "min":
                raw.unit_annotations["period_hours"] = "min"
        raw.horizon_hint = (count, hours)
    elif section == "GENERATORS":
        toks = [t for t in re.split(r"[|\s]+", line) if t]
        if len(toks) != len(header):
            raw.leftovers.append(line)
            return
        row: dict = {}
        for col, tok in zip(header, toks):
            if col == "name":
                row["name"] = tok
            elif col == "merit_class":
                row["merit_class"] = tok
            elif col == "init_on":
                b = _parse_bool(tok)
                if b is None:
                    raw.leftovers.append(line)
                    return
                row["init_on"] = b
            else:
                v = _parse_number(tok)
                if v is None:
                    raw.leftovers.append(line)
                    return
                row[col] = v
        raw.generator_rows.append(row)
    elif section in ("DEMAND", "RESERVE"):
        pairs = []
        if ":" in line:
            for chunk in line.split(","):
                chunk = chunk.strip()
                if not chunk:
                    continue
                t_str, _, v_str = chunk.partition(":")
                t, v = _parse_number(t_str), _parse_number(v_str)
                if t is None or v is None or int(t) != t:
                    raw.leftovers.append(line)
                    return
                pairs.append((int(t), v))
        else:
            vals = [_parse_number(t) for t in re.split(r"[,\s]+", line) if t]
            if any(v is None for v in vals) or not vals:
                raw.leftovers.append(line)
                return
            if section == "RESERVE" and len(vals) == 1 and raw.reserve_series is None:
                raw.reserve_fraction = vals[0]
                return
            start = len(raw.demand_series if section == "DEMAND" else (raw.reserve_series or []))
            pairs = [(start + k, v) for k, v in enumerate(vals)]
        if section == "DEMAND":
            raw.demand_series.extend(pairs)
        else:
            if raw.reserve_series is None:
                raw.reserve_series = []
            raw.reserve_series.extend(pairs)
    elif section == "POLICIES":
        m = _MUST_RUN_RE.match(line)
        if m:
            raw.policy_statements.append(PolicyStatement(
                "must_run", [m.group(1)], (int(m.group(2)), int(m.group(3))), text=line))
            return
        m = _EXCLUSIVE_RE.match(line)
        if m:
            names = _split_name_list(m.group(1))
            if len(names) >= 2:
                raw.policy_statements.append(PolicyStatement("exclusive", names, text=line))
                return
        raw.leftovers.append(line)


def normalize_units(raw: RawExtraction) -> RawExtraction:
    """Convert every annotated value to canonical units; exact factors only.

    Idempotent: canonical annotations convert with factor 1. Raises
    UnknownUnit for annotations outside the supported table.
    """
    out = RawExtraction.from_dict(raw.to_dict())
    ann = out.unit_annotations

    for fld, unit in list(ann.items()):
        if fld in ("demand", "reserve"):
            f = unit_table.factor(fld, unit)
            if fld == "demand":
                out.demand_series = [(t, v * f) for t, v in out.demand_series]
            elif out.reserve_series is not None:
                out.reserve_series = [(t, v * f) for t, v in out.reserve_series]
            ann[fld] = unit_table.canonical_for(fld)
        elif fld == "period_hours":
            f = unit_table.factor(fld, unit)
            if out.horizon_hint:
                out.horizon_hint = (out.horizon_hint[0], out.horizon_hint[1] * f)
            ann[fld] = unit_table.canonical_for(fld)
        else:
            f = unit_table.factor(fld, unit)
            for row in out.generator_rows:
                if fld in row and isinstance(row[fld], (int, float)) and not isinstance(row[fld], bool):
                    row[fld] = row[fld] * f
            ann[fld] = unit_table.canonical_for(fld)
    return out


def render_scenario(schema) -> str:
    """Render a schema back into the canonical grammar (round-trip inverse).

    Floats are written with repr so re-parsing reproduces them exactly.
    """
    lines = []
    T = schema.horizon
    ph = schema.period_hours
    if ph == 1.0:
        lines.append(f"HORIZON: {T} hourly")
    elif ph == 24.0:
        lines.append(f"HORIZON: {T} daily")
    else:
        lines.append(f"HORIZON: {T} periods of {ph!r} h")
    lines.append("GENERATORS:")
    cols = GENERATOR_FIELDS
    lines.append(" ".join(cols))
    for g in schema.generators:
        toks = []
        for c in cols:
            v = getattr(g, c)
            if c == "init_on":
                toks.append("on" if v else "off")
            elif isinstance(v, float):
                toks.append(repr(v))
            else:
                toks.append(str(v))
        lines.append(" ".join(toks))
    lines.append("DEMAND:")
    for t, v in enumerate(schema.demand):
        lines.append(f"{t}: {v!r}")
    lines.append("RESERVE:")
    for t, v in enumerate(schema.reserve):
        lines.append(f"{t}: {v!r}")
    if schema.must_run or schema.exclusive_groups:
        lines.append("POLICIES:")
        for gi, (s, e) in schema.must_run:
            lines.append(f"Unit {schema.generators[gi].name} must run from period {s} to period {e}.")
        for group in schema.exclusive_groups:
            names = [schema.generators[i].name for i in group]
            if len(names) == 2:
                blob = f"{names[0]} and {names[1]}"
            else:
                blob = ", ".join(names[:-1]) + f" and {names[-1]}"
            lines.append(f"Units {blob} are mutually exclusive.")
    return "\n".join(lines) + "\n"
