"""Separator configuration: rule table, remote policy, and the guard layer.

The guard is a total function: any anomaly in a raw reply falls back to the
documented conservative default for that field, and a fully unparseable reply
yields the full conservative default (all families on, one pass, conservative
thresholds). The decision trail rides on the returned config.
"""
from __future__ import annotations

import json
import math

from ..cuts import AGGRESSIVENESS_LEVELS, SeparatorConfig
from ..llm import BackendUnavailable, extract_json_block
from .features import PresolveDiagnostics


class PolicyUnavailable(Exception):
    """Remote policy backend is down; callers fall back to the rule table."""


CONSERVATIVE = SeparatorConfig(gomory_enabled=True, clique_enabled=True,
                               updown_implication_enabled=True, max_passes=1,
                               aggressiveness="conservative")

# rule table, keyed on the root integrality-gap estimate:
#   < 1%          -> conservative: all families, 1 pass
#   1% .. 5%      -> normal: all families, 2 passes
#   >= 5% or inf  -> aggressive: all families, 3 passes
RULE_TABLE = (
    (0.01, SeparatorConfig(True, True, True, 1, "conservative")),
    (0.05, SeparatorConfig(True, True, True, 2, "normal")),
    (math.inf, SeparatorConfig(True, True, True, 3, "aggressive")),
)

POLICY_PROMPT = """\
You configure cut separators for a MILP solve. Given pre-solve diagnostics,
reply with a JSON object with exactly these fields:
  gomory_enabled: bool
  clique_enabled: bool
  updown_implication_enabled: bool
  max_passes: integer in [0, 5]
  aggressiveness: "conservative" | "normal" | "aggressive"
Reply with the JSON object only."""


def configure_separators(diag: PresolveDiagnostics, policy: str = "rule-based",
                         backend=None) -> SeparatorConfig:
    """Pick a whitelisted separator configuration for one instance."""
    if policy == "rule-based":
        gap = diag.root_gap_estimate
        for threshold, cfg in RULE_TABLE:
            if gap < threshold:
                return guard_config(cfg.to_dict())
        return guard_config(CONSERVATIVE.to_dict())
    if policy == "remote-chat":
        if backend is None:
            raise PolicyUnavailable("no chat backend configured")
        try:
            reply = backend.complete(POLICY_PROMPT, json.dumps(diag.to_dict(), sort_keys=True))
        except BackendUnavailable as e:
            raise PolicyUnavailable(str(e)) from e
        return guard_config(reply)
    raise ValueError(f"unknown separator policy {policy!r}")


def guard_config(raw) -> SeparatorConfig:
    """Validate a raw reply into the whitelist; total and idempotent.

    Accepts a SeparatorConfig, a dict, or raw reply text. Out-of-range values
    clamp, wrong types and unknown fields revert to the conservative default
    for that field, with every decision recorded in `guard_trail`.
    """
    trail: list[str] = []
    if isinstance(raw, SeparatorConfig):
        data = raw.to_dict()
    elif isinstance(raw, dict):
        data = dict(raw)
    else:
        data = extract_json_block(str(raw)) if raw is not None else None
        if not isinstance(data, dict):
            trail.append("unparseable reply: full conservative default")
            cfg = SeparatorConfig(**{**CONSERVATIVE.to_dict()})
            cfg.guard_trail = tuple(trail)
            return cfg

    defaults = CONSERVATIVE.to_dict()
    clean = {}
    for fld in ("gomory_enabled", "clique_enabled", "updown_implication_enabled"):
        v = data.get(fld, None)
        if isinstance(v, bool):
            clean[fld] = v
        elif v in (0, 1):
            clean[fld] = bool(v)
            trail.append(f"{fld}: coerced {v!r} to {bool(v)}")
        else:
            clean[fld] = defaults[fld]
            if fld in data:
                trail.append(f"{fld}: invalid {v!r}, reverted to default {defaults[fld]}")
    v = data.get("max_passes", None)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (isinstance(v, float) and v != int(v)):
        clean["max_passes"] = defaults["max_passes"]
        if "max_passes" in data:
            trail.append(f"max_passes: invalid {v!r}, reverted to default {defaults['max_passes']}")
    else:
        clamped = min(5, max(0, int(v)))
        clean["max_passes"] = clamped
        if clamped != v:
            trail.append(f"max_passes: clamped {v!r} to {clamped}")
    v = data.get("aggressiveness", None)
    if v in AGGRESSIVENESS_LEVELS:
        clean["aggressiveness"] = v
    else:
        clean["aggressiveness"] = defaults["aggressiveness"]
        if "aggressiveness" in data:
            trail.append(f"aggressiveness: invalid {v!r}, reverted to default")
    for fld in data:
        if fld not in defaults:
            trail.append(f"{fld}: unknown field dropped")
    cfg = SeparatorConfig(**clean)
    cfg.guard_trail = tuple(trail)
    return cfg
