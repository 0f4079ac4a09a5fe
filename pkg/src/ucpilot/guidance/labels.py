"""Strong-branching proxy labels: product rule over up/down probe improvements."""
from __future__ import annotations

import math

import numpy as np

from ..milp import MilpModel
from ..simplex import SimplexEngine

PROBE_MAX_ITER = 400
_EPS = 1e-6


def strong_branching_labels(model: MilpModel, root_res, candidates=None,
                            probe_budget: int = 20,
                            engine: SimplexEngine | None = None) -> dict[int, float]:
    """Score fractional binaries by probing both branch children.

    Each probe is one bounded warm LP re-solve. Label = product of the two
    objective improvements (floored at a small epsilon); both-infeasible
    probes score +inf since branching there closes the node. Probe failures
    (iteration cap) contribute a zero improvement and are flagged by the
    label value 0 for that side.
    """
    if engine is None:
        engine = SimplexEngine(model)
        root_res = engine.solve()
    x = root_res.x
    int_cols = np.nonzero(model.col_integer)[0]
    frac = np.abs(x[int_cols] - np.round(x[int_cols]))
    if candidates is None:
        mask = frac > 1e-6
        cand = int_cols[mask]
        dist = np.minimum(x[cand] - np.floor(x[cand]), np.ceil(x[cand]) - x[cand])
        order = np.lexsort((cand, -dist))
        cand = cand[order][:probe_budget]
    else:
        cand = np.asarray(list(candidates), dtype=np.int64)[:probe_budget]

    lo0 = model.col_lower.copy()
    up0 = model.col_upper.copy()
    z0 = root_res.objective
    labels: dict[int, float] = {}
    for c in cand:
        val = x[c]
        imps = []
        feas = []
        for side in ("down", "up"):
            lo, up = lo0.copy(), up0.copy()
            if side == "down":
                up[c] = math.floor(val)
            else:
                lo[c] = math.ceil(val)
            r = engine.solve(lo, up, basis=root_res.basis, vstat=root_res.vstat,
                             max_iter=PROBE_MAX_ITER)
            if r.status == "infeasible":
                feas.append(False)
                imps.append(math.inf)
            elif r.status == "optimal":
                feas.append(True)
                imps.append(max(r.objective - z0, 0.0))
            else:
                feas.append(True)
                imps.append(0.0)  # probe budget hit: no usable information
        if not any(feas):
            labels[int(c)] = math.inf
        else:
            a = imps[0] if math.isfinite(imps[0]) else max(imps[1], _EPS) * 1e3 + 1.0
            b = imps[1] if math.isfinite(imps[1]) else max(imps[0], _EPS) * 1e3 + 1.0
            labels[int(c)] = max(a, _EPS) * max(b, _EPS)
    return labels
