"""Scratch (not a test): final preset check across sizes and seeds."""
import time

from ucpilot.compiler import compile_uc, commitment_hint, dive_columns
from ucpilot.cuts import SeparatorConfig
from ucpilot.instgen import gen_instance, small_scale_specs
from ucpilot.milp import SolverConfig
from ucpilot.solver import branch_and_bound

if __name__ == "__main__":
    for n, seeds in ((3, (1, 2, 3, 4)), (10, (1, 2, 3, 4)), (30, (1, 2)), (60, (1,))):
        spec = small_scale_specs()[n]
        for seed in seeds:
            s = gen_instance(spec, seed)
            model, idx = compile_uc(s)
            cfg = SolverConfig(time_limit=60.0, gap_tolerance=5e-6,
                               warm_hint=commitment_hint(s, idx),
                               dive_cols=dive_columns(idx),
                               separator_config=SeparatorConfig(max_passes=2,
                                                                aggressiveness="normal"))
            t0 = time.perf_counter()
            res = branch_and_bound(model, cfg)
            print(f"{n:3d}u s{seed}: {res.status.value:12} gap {res.gap:.2e} "
                  f"nodes {res.nodes_explored:5d} cuts {res.cuts_added:3d} "
                  f"{time.perf_counter()-t0:6.1f}s", flush=True)
