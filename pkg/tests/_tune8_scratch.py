"""Scratch: 30/60u with the smoothed large-bin preset."""
import time
from ucpilot.compiler import compile_uc, commitment_hint, dive_columns, temporal_priorities
from ucpilot.cuts import SeparatorConfig
from ucpilot.instgen import gen_instance, small_scale_specs
from ucpilot.milp import SolverConfig
from ucpilot.solver import branch_and_bound

if __name__ == "__main__":
    for n, seeds in ((30, (1, 2, 3)), (60, (1, 2))):
        spec = small_scale_specs()[n]
        for seed in seeds:
            t0 = time.perf_counter()
            s = gen_instance(spec, seed)
            t_gen = time.perf_counter() - t0
            model, idx = compile_uc(s)
            cfg = SolverConfig(time_limit=60.0, gap_tolerance=1e-5,
                               warm_hint=commitment_hint(s, idx), dive_cols=dive_columns(idx),
                               branch_priorities=temporal_priorities(idx),
                               separator_config=SeparatorConfig(max_passes=2, aggressiveness="normal"))
            t0 = time.perf_counter()
            res = branch_and_bound(model, cfg)
            print(f"{n:3d}u s{seed}: gen {t_gen:4.1f}s {res.status.value:12} gap {res.gap:.2e} "
                  f"nodes {res.nodes_explored:5d} cuts {res.cuts_added:3d} "
                  f"{time.perf_counter()-t0:6.1f}s", flush=True)
