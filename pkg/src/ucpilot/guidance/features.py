"""Bipartite variable/constraint encoding of a MILP at its root relaxation.

Feature widths are fixed and documented here; every normalization keeps
magnitudes within [-10, 10]. Row families map to a fixed one-hot vocabulary
shared with the compiler's tags (unknown tags fold into "other").
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..milp import LE, EQ, GE, MilpModel

FAMILY_VOCAB = ("balance", "reserve", "cap_lo", "cap_su", "cap_sd", "logic",
                "min_up", "min_down", "ramp_up", "ramp_down", "exclusive", "other")

VAR_FEATURES = ("is_integer", "obj_norm", "lp_value_norm", "fractionality",
                "at_lower", "at_upper", "lower_norm", "upper_norm")
CON_FEATURES = ("sense_le", "sense_eq", "sense_ge", "rhs_norm", "slack_norm",
                "row_norm_log") + tuple(f"family_{f}" for f in FAMILY_VOCAB)

_CLIP = 10.0


class EncodingFailed(Exception):
    """A non-finite feature slipped through; upstream numerics are suspect."""


@dataclass
class BipartiteGraph:
    var_features: np.ndarray       # (num_cols, len(VAR_FEATURES))
    con_features: np.ndarray       # (num_rows, len(CON_FEATURES))
    edge_cols: np.ndarray          # (nnz,)
    edge_rows: np.ndarray          # (nnz,)
    edge_values: np.ndarray        # (nnz,) coefficient / row norm

    @property
    def num_vars(self) -> int:
        return self.var_features.shape[0]

    @property
    def num_cons(self) -> int:
        return self.con_features.shape[0]

    @property
    def num_edges(self) -> int:
        return len(self.edge_values)


def _bound_norm(v: np.ndarray) -> np.ndarray:
    out = np.where(np.isfinite(v), v / (1.0 + np.abs(np.where(np.isfinite(v), v, 0.0))),
                   np.sign(v))
    return out


def encode_bipartite(model: MilpModel, lp_res) -> BipartiteGraph:
    """Encode the model plus its root-LP state as a bipartite graph."""
    n, m = model.num_cols, model.num_rows
    x = np.asarray(lp_res.x, dtype=float)

    cmax = max(1.0, float(np.abs(model.col_obj).max(initial=0.0)))
    rng = model.col_upper - model.col_lower
    finite_rng = np.isfinite(rng) & (rng > 0)
    lp_norm = np.zeros(n)
    lp_norm[finite_rng] = (x[finite_rng] - model.col_lower[finite_rng]) / rng[finite_rng]
    lp_norm[~finite_rng] = _bound_norm(x[~finite_rng])
    fractionality = np.where(model.col_integer, np.abs(x - np.round(x)), 0.0)
    at_lower = (np.abs(x - model.col_lower) <= 1e-9).astype(float)
    at_upper = (np.abs(x - model.col_upper) <= 1e-9).astype(float)

    var = np.column_stack([
        model.col_integer.astype(float),
        np.clip(model.col_obj / cmax, -_CLIP, _CLIP),
        np.clip(lp_norm, -_CLIP, _CLIP),
        fractionality,
        at_lower,
        at_upper,
        _bound_norm(model.col_lower),
        _bound_norm(model.col_upper),
    ])

    csr = model.rows
    row_norm = np.sqrt(np.asarray(csr.multiply(csr).sum(axis=1)).ravel())
    denom = np.maximum(row_norm, 1.0)
    act = csr @ x
    slack = model.row_rhs - act
    fam_idx = np.array([FAMILY_VOCAB.index(f) if f in FAMILY_VOCAB else FAMILY_VOCAB.index("other")
                        for f in model.row_families], dtype=int)
    fam_onehot = np.zeros((m, len(FAMILY_VOCAB)))
    fam_onehot[np.arange(m), fam_idx] = 1.0

    con = np.column_stack([
        (model.row_sense == LE).astype(float),
        (model.row_sense == EQ).astype(float),
        (model.row_sense == GE).astype(float),
        np.clip(model.row_rhs / denom, -_CLIP, _CLIP),
        np.clip(slack / denom, -_CLIP, _CLIP),
        np.clip(np.log10(1.0 + row_norm), 0.0, _CLIP),
        fam_onehot,
    ])

    coo = csr.tocoo()
    edge_values = coo.data / denom[coo.row]

    for arr, name in ((var, "variable"), (con, "constraint"), (edge_values, "edge")):
        if arr.size and not np.all(np.isfinite(arr)):
            raise EncodingFailed(f"non-finite {name} feature")
    return BipartiteGraph(var_features=var, con_features=con,
                          edge_cols=coo.col.astype(np.int64),
                          edge_rows=coo.row.astype(np.int64),
                          edge_values=edge_values.astype(float))


@dataclass
class PresolveDiagnostics:
    num_cols: int
    num_rows: int
    num_binaries: int
    nnz_density: float
    row_degree: tuple[int, float, int]     # min, median, max
    col_degree: tuple[int, float, int]
    family_fractions: dict[str, float]
    root_lp_objective: float
    root_gap_estimate: float               # vs greedy incumbent; inf when none

    def to_dict(self) -> dict:
        return {
            "num_cols": self.num_cols, "num_rows": self.num_rows,
            "num_binaries": self.num_binaries, "nnz_density": self.nnz_density,
            "row_degree": list(self.row_degree), "col_degree": list(self.col_degree),
            "family_fractions": dict(self.family_fractions),
            "root_lp_objective": self.root_lp_objective,
            "root_gap_estimate": self.root_gap_estimate if math.isfinite(self.root_gap_estimate) else "inf",
        }


def presolve_diagnostics(model: MilpModel, lp_res, greedy_objective: float | None = None
                         ) -> PresolveDiagnostics:
    """Cheap statistics from the model and one root LP solve only."""
    n, m = model.num_cols, model.num_rows
    csr = model.rows
    row_deg = np.diff(csr.indptr)
    col_deg = np.bincount(csr.indices, minlength=n)
    binaries = int(np.sum(model.col_integer & (model.col_lower >= 0) & (model.col_upper <= 1)))
    fams: dict[str, float] = {}
    for f in model.row_families:
        key = f if f in FAMILY_VOCAB else "other"
        fams[key] = fams.get(key, 0.0) + 1.0
    for k in fams:
        fams[k] /= max(m, 1)
    if greedy_objective is None or greedy_objective == 0.0:
        gap_est = math.inf if greedy_objective is None else 0.0
    else:
        gap_est = abs(greedy_objective - lp_res.objective) / abs(greedy_objective)
    return PresolveDiagnostics(
        num_cols=n, num_rows=m, num_binaries=binaries,
        nnz_density=csr.nnz / max(n * m, 1),
        row_degree=(int(row_deg.min(initial=0)), float(np.median(row_deg)) if m else 0.0,
                    int(row_deg.max(initial=0))),
        col_degree=(int(col_deg.min(initial=0)), float(np.median(col_deg)) if n else 0.0,
                    int(col_deg.max(initial=0))),
        family_fractions=fams,
        root_lp_objective=lp_res.objective,
        root_gap_estimate=gap_est,
    )
