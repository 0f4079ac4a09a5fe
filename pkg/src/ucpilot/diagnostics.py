"""Machine-readable findings shared by the validator, repair loop and solver."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Optional


class Code(enum.IntEnum):
    """Finding categories. Enum order doubles as the repair tie-break order."""

    SHAPE_MISMATCH = 0
    BOUND_ORDER = 1
    RAMP_INFEASIBLE = 2
    CAPACITY_SHORTFALL = 3
    EXCLUSIVE_MUST_RUN_CONFLICT = 4
    UNRESOLVED_REFERENCE = 5
    UNIT_ERROR = 6
    MISSING_FIELD = 7
    SOLVER_INFEASIBLE = 8
    POST_SOLVE_VIOLATION = 9


ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Edit:
    """A structured single-field change: set `path` from `old` to `new`."""

    path: str
    old: Any
    new: Any

    def to_dict(self) -> dict:
        return {"path": self.path, "old": self.old, "new": self.new}


@dataclass
class Diagnostic:
    """One validation or solver finding.

    `subject` is a path into the schema document (e.g. ``generators[2].p_min``);
    error severity blocks compilation, warnings do not. `suggested_fix` carries
    a deterministic rule-based edit when one exists.
    """

    code: Code
    severity: str
    subject: str
    message: str
    suggested_fix: Optional[Edit] = None
    details: dict = field(default_factory=dict)

    @property
    def is_error(self) -> bool:
        return self.severity == ERROR

    def to_dict(self) -> dict:
        out = {
            "code": self.code.name,
            "severity": self.severity,
            "subject": self.subject,
            "message": self.message,
        }
        if self.suggested_fix is not None:
            out["suggested_fix"] = self.suggested_fix.to_dict()
        if self.details:
            out["details"] = self.details
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Diagnostic":
        fix = d.get("suggested_fix")
        return cls(
            code=Code[d["code"]],
            severity=d["severity"],
            subject=d["subject"],
            message=d["message"],
            suggested_fix=Edit(fix["path"], fix["old"], fix["new"]) if fix else None,
            details=d.get("details", {}),
        )


def error(code: Code, subject: str, message: str, fix: Edit | None = None,
          **details) -> Diagnostic:
    return Diagnostic(code, ERROR, subject, message, fix, dict(details))


def warning(code: Code, subject: str, message: str, fix: Edit | None = None,
            **details) -> Diagnostic:
    return Diagnostic(code, WARNING, subject, message, fix, dict(details))


def errors_in(diags: list[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diags if d.is_error]
