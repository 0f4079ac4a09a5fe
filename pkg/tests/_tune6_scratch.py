"""Scratch: guided priorities + post-cut dive effect on 10u trees."""
import time

import numpy as np

from ucpilot.compiler import compile_uc, commitment_hint, dive_columns
from ucpilot.cuts import SeparatorConfig
from ucpilot.guidance.labels import strong_branching_labels
from ucpilot.guidance.priorities import scores_to_priorities
from ucpilot.instgen import gen_instance, small_scale_specs
from ucpilot.milp import SolverConfig
from ucpilot.simplex import SimplexEngine
from ucpilot.solver import branch_and_bound

if __name__ == "__main__":
    for seed in (1, 2):
        s = gen_instance(small_scale_specs()[10], seed)
        model, idx = compile_uc(s)
        base = dict(time_limit=60.0, gap_tolerance=1e-5,
                    warm_hint=commitment_hint(s, idx), dive_cols=dive_columns(idx),
                    separator_config=SeparatorConfig(max_passes=2, aggressiveness="normal"))

        # strong-branching-informed priorities on the u block
        engine = SimplexEngine(model)
        root = engine.solve()
        labels = strong_branching_labels(model, root, probe_budget=24, engine=engine)
        finite = {c: v for c, v in labels.items() if np.isfinite(v)}
        prio_sb = scores_to_priorities(finite) if len(finite) >= 2 else {}

        # early-period-first static priorities
        prio_t = {}
        for i in range(idx.n_units):
            for t in range(idx.horizon):
                prio_t[idx.u(i, t)] = max(0, 9 - t // 3)

        for name, prio in (("default", None), ("sb", prio_sb), ("early-t", prio_t)):
            cfg = SolverConfig(**base, branch_priorities=prio)
            t0 = time.perf_counter()
            res = branch_and_bound(model, cfg)
            print(f"10u s{seed} {name:8}: {res.status.value:10} gap {res.gap:.2e} "
                  f"nodes {res.nodes_explored:5d} {time.perf_counter()-t0:5.1f}s", flush=True)
