"""Sparse mixed-integer linear program container, solver config and results."""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = 0, 1, 2
_SENSE_STR = {LE: "<=", EQ: "=", GE: ">="}


class ModelMalformed(Exception):
    """The model violates a structural invariant (bounds, finiteness, duplicates)."""


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    TIME_LIMIT = "TimeLimit"
    ITERATION_LIMIT = "IterationLimit"


@dataclass
class MilpModel:
    """Column/row arrays of a minimization MILP.

    Rows are sparse; senses are LE/EQ/GE; every row carries a family tag used
    by the separators and the bipartite encoder.
    """

    col_lower: np.ndarray
    col_upper: np.ndarray
    col_obj: np.ndarray
    col_integer: np.ndarray
    col_names: list[str]
    rows: sp.csr_matrix
    row_sense: np.ndarray
    row_rhs: np.ndarray
    row_families: list[str]

    @property
    def num_cols(self) -> int:
        return len(self.col_lower)

    @property
    def num_rows(self) -> int:
        return self.rows.shape[0]

    def validate(self) -> None:
        n, m = self.num_cols, self.num_rows
        if self.rows.shape[1] != n:
            raise ModelMalformed(f"row matrix has {self.rows.shape[1]} columns, model has {n}")
        for arr, name in ((self.col_obj, "objective"), (self.row_rhs, "rhs"),
                          (self.rows.data, "coefficients")):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ModelMalformed(f"non-finite {name}")
        if np.any(self.col_lower > self.col_upper + 1e-12):
            bad = int(np.argmax(self.col_lower > self.col_upper + 1e-12))
            raise ModelMalformed(f"column {self.col_names[bad]} has lower {self.col_lower[bad]} "
                                 f"> upper {self.col_upper[bad]}")
        indptr, indices = self.rows.indptr, self.rows.indices
        for r in range(m):
            seg = indices[indptr[r]:indptr[r + 1]]
            if len(np.unique(seg)) != len(seg):
                raise ModelMalformed(f"row {r} carries duplicate column ids")
        if len(self.col_names) != n or len(self.row_families) != m:
            raise ModelMalformed("name/family lists out of step with dimensions")

    def with_extra_rows(self, coefs: list[dict[int, float]], senses: list[int],
                        rhs: list[float], families: list[str]) -> "MilpModel":
        """New model with rows appended (used for cut rows); columns unchanged."""
        data, indices, indptr = [], [], [0]
        for row in coefs:
            cols = sorted(row)
            indices.extend(cols)
            data.extend(row[c] for c in cols)
            indptr.append(len(indices))
        extra = sp.csr_matrix((np.array(data, dtype=float), np.array(indices, dtype=np.int64),
                               np.array(indptr, dtype=np.int64)),
                              shape=(len(coefs), self.num_cols))
        return replace(
            self,
            rows=sp.vstack([self.rows, extra], format="csr"),
            row_sense=np.concatenate([self.row_sense, np.array(senses, dtype=np.int8)]),
            row_rhs=np.concatenate([self.row_rhs, np.array(rhs, dtype=float)]),
            row_families=self.row_families + list(families),
        )

    def dump_text(self) -> str:
        """Deterministic plain-text dump (objective, bounds, rows in fixed order)."""
        out = ["minimize"]
        out.append("  " + " + ".join(f"{self.col_obj[j]!r} {self.col_names[j]}"
                                     for j in range(self.num_cols) if self.col_obj[j] != 0.0) or "  0")
        out.append("subject to")
        csr = self.rows
        for r in range(self.num_rows):
            seg = slice(csr.indptr[r], csr.indptr[r + 1])
            terms = " + ".join(f"{csr.data[k]!r} {self.col_names[csr.indices[k]]}"
                               for k in range(seg.start, seg.stop))
            out.append(f"  [{self.row_families[r]}] {terms} {_SENSE_STR[int(self.row_sense[r])]} {self.row_rhs[r]!r}")
        out.append("bounds")
        for j in range(self.num_cols):
            kind = "int" if self.col_integer[j] else "cont"
            out.append(f"  {self.col_lower[j]!r} <= {self.col_names[j]} <= {self.col_upper[j]!r} [{kind}]")
        return "\n".join(out) + "\n"

    def content_hash(self) -> str:
        return hashlib.sha256(self.dump_text().encode()).hexdigest()


class ModelBuilder:
    """Incremental construction of a MilpModel."""

    def __init__(self):
        self._lower: list[float] = []
        self._upper: list[float] = []
        self._obj: list[float] = []
        self._integer: list[bool] = []
        self._names: list[str] = []
        self._row_data: list[float] = []
        self._row_indices: list[int] = []
        self._row_indptr: list[int] = [0]
        self._senses: list[int] = []
        self._rhs: list[float] = []
        self._families: list[str] = []

    def add_column(self, name: str, lower: float, upper: float, obj: float = 0.0,
                   integer: bool = False) -> int:
        self._names.append(name)
        self._lower.append(float(lower))
        self._upper.append(float(upper))
        self._obj.append(float(obj))
        self._integer.append(bool(integer))
        return len(self._names) - 1

    def add_row(self, coefs: dict[int, float], sense: int, rhs: float, family: str) -> int:
        if len(set(coefs)) != len(coefs):
            raise ModelMalformed("duplicate column ids in row")
        for c in sorted(coefs):
            self._row_indices.append(c)
            self._row_data.append(float(coefs[c]))
        self._row_indptr.append(len(self._row_indices))
        self._senses.append(int(sense))
        self._rhs.append(float(rhs))
        self._families.append(family)
        return len(self._rhs) - 1

    def build(self) -> MilpModel:
        n = len(self._names)
        rows = sp.csr_matrix(
            (np.array(self._row_data, dtype=float),
             np.array(self._row_indices, dtype=np.int64),
             np.array(self._row_indptr, dtype=np.int64)),
            shape=(len(self._rhs), n))
        model = MilpModel(
            col_lower=np.array(self._lower, dtype=float),
            col_upper=np.array(self._upper, dtype=float),
            col_obj=np.array(self._obj, dtype=float),
            col_integer=np.array(self._integer, dtype=bool),
            col_names=list(self._names),
            rows=rows,
            row_sense=np.array(self._senses, dtype=np.int8),
            row_rhs=np.array(self._rhs, dtype=float),
            row_families=list(self._families),
        )
        model.validate()
        return model


@dataclass
class SolverConfig:
    time_limit: float = 600.0
    gap_tolerance: float = 1e-6
    integrality_tolerance: float = 1e-6
    feasibility_tolerance: float = 1e-7
    node_limit: int = 1_000_000
    branch_priorities: Optional[dict[int, int]] = None
    separator_config: Optional[object] = None     # guidance.SeparatorConfig
    warm_hint: Optional[dict[int, int]] = None    # col -> bound side (0 lower, 1 upper)
    dive_cols: Optional[list[int]] = None         # integer cols the dive may fix
    node_selection: str = "depth-first-then-best"  # or "best-bound"
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("gap_tolerance", "integrality_tolerance", "feasibility_tolerance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if self.node_selection not in ("best-bound", "depth-first-then-best"):
            raise ValueError(f"unknown node_selection {self.node_selection!r}")


def mip_gap(z_p: float, z_d: float) -> float:
    """|z_P - z_D| / |z_P| with the 0/0 -> 0 and z_P = 0 -> +inf conventions."""
    if z_p == 0.0:
        return 0.0 if z_d == 0.0 else math.inf
    return abs(z_p - z_d) / abs(z_p)


@dataclass
class SolveResult:
    status: Status
    incumbent_value: Optional[float]
    dual_bound: float
    gap: float
    assignment: Optional[np.ndarray]
    nodes_explored: int
    cuts_added: int
    wall_time: float

    def to_dict(self, include_assignment: bool = False) -> dict:
        d = {
            "status": self.status.value,
            "incumbent_value": _jsafe(self.incumbent_value),
            "dual_bound": _jsafe(self.dual_bound),
            "gap": _jsafe(self.gap),
            "nodes_explored": self.nodes_explored,
            "cuts_added": self.cuts_added,
            "wall_time": self.wall_time,
        }
        if include_assignment and self.assignment is not None:
            d["assignment"] = [float(v) for v in self.assignment]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw), sort_keys=True)


def _jsafe(v):
    if v is None:
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return float(v)
