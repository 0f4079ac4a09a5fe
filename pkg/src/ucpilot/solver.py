"""Branch-and-bound over the simplex engine, with root cuts and priorities.

Node selection is best-bound with depth-first plunging until the first
incumbent (pure best-bound also available). Branching picks the highest
integer priority first, then most-fractional, then larger objective
magnitude, then lower column id. A deterministic rounding dive supplies the
first incumbent. Separators run at the root for up to the configured pass
count; one extra structural separation round fires if early progress stalls.
Everything is single-threaded and deterministic for a fixed config.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .cuts import SeparatorConfig, separate_cuts, _row_keys
from .milp import GE, MilpModel, ModelMalformed, SolveResult, SolverConfig, Status, mip_gap
from .simplex import LpNumericalFailure, SimplexEngine

_IMPROVE_EPS = 1e-12


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    depth: int = field(compare=False)
    overrides: dict = field(compare=False)     # col -> (lo, up)
    basis: np.ndarray | None = field(compare=False)
    vstat: np.ndarray | None = field(compare=False)


class _Tree:
    def __init__(self):
        self.heap: list[_Node] = []
        self.stack: list[_Node] = []

    def push(self, node: _Node, plunge: bool) -> None:
        if plunge:
            self.stack.append(node)
        else:
            heapq.heappush(self.heap, node)

    def pop(self, prefer_stack: bool) -> _Node | None:
        if prefer_stack and self.stack:
            return self.stack.pop()
        if self.stack:
            # fold the plunge stack back into the heap once plunging ends
            for nd in self.stack:
                heapq.heappush(self.heap, nd)
            self.stack.clear()
        if self.heap:
            return heapq.heappop(self.heap)
        return None

    def min_bound(self) -> float:
        vals = [nd.bound for nd in self.stack]
        if self.heap:
            vals.append(self.heap[0].bound)
        return min(vals) if vals else math.inf

    def prune(self, cutoff: float) -> None:
        self.heap = [nd for nd in self.heap if nd.bound < cutoff]
        heapq.heapify(self.heap)
        self.stack = [nd for nd in self.stack if nd.bound < cutoff]

    def __len__(self) -> int:
        return len(self.heap) + len(self.stack)


def branch_and_bound(model: MilpModel, cfg: SolverConfig | None = None,
                     trace=None) -> SolveResult:
    """Solve the MILP; deterministic for a fixed config on one thread."""
    cfg = cfg or SolverConfig()
    try:
        model.validate()
    except ModelMalformed:
        raise
    t0 = time.perf_counter()
    deadline = time.monotonic() + cfg.time_limit

    int_cols = np.nonzero(model.col_integer)[0]
    engine = SimplexEngine(model, feas_tol=cfg.feasibility_tolerance,
                           opt_tol=min(1e-7, cfg.gap_tolerance))
    root_lo = model.col_lower.copy()
    root_up = model.col_upper.copy()

    prio = np.zeros(model.num_cols)
    if cfg.branch_priorities:
        for c, p in cfg.branch_priorities.items():
            if 0 <= int(c) < model.num_cols:
                prio[int(c)] = p

    def _trace(line: str) -> None:
        if trace is not None:
            trace.write(line + "\n")

    hint = None
    if cfg.warm_hint:
        from .simplex import AT_LOWER, AT_UPPER
        hint = np.full(model.num_cols, -1, dtype=np.int8)
        for c, side in cfg.warm_hint.items():
            if 0 <= int(c) < model.num_cols:
                hint[int(c)] = AT_UPPER if side else AT_LOWER

    res = engine.solve(root_lo, root_up, deadline=deadline, hint=hint)
    nodes_explored = 1
    cuts_added = 0
    if res.status == "infeasible":
        return _final(Status.INFEASIBLE, None, math.inf, None, nodes_explored, cuts_added, t0)
    if res.status == "unbounded":
        return _final(Status.UNBOUNDED, None, -math.inf, None, nodes_explored, cuts_added, t0)
    if res.status == "timelimit":
        return _final(Status.TIME_LIMIT, None, -math.inf, None, nodes_explored, cuts_added, t0)
    if res.status == "iterlimit":
        raise LpNumericalFailure("root LP exhausted its iteration budget")

    if _integral(res.x, int_cols, cfg.integrality_tolerance):
        return _final(Status.OPTIMAL, res.objective, res.objective, res.x,
                      nodes_explored, cuts_added, t0)

    # primal side first: an incumbent before separation enables an early
    # gap-stop and keeps large instances from burning the budget boundless
    best_dual = res.objective
    incumbent = None
    incumbent_x = None
    dive_cols = int_cols
    if cfg.dive_cols is not None:
        dive_cols = np.array([c for c in cfg.dive_cols if model.col_integer[c]], dtype=np.int64)
    dive_frac = 0.45 if model.num_rows > 4000 else 0.3
    dive_deadline = min(deadline, time.monotonic() + dive_frac * cfg.time_limit)
    dive = _rounding_dive(engine, root_lo, root_up, res, int_cols, dive_cols,
                          cfg.integrality_tolerance, dive_deadline, hint_arr=hint)
    if dive is not None:
        incumbent, incumbent_x = dive
        _trace(f"dive incumbent {incumbent:.9g}")
        if mip_gap(incumbent, res.objective) <= cfg.gap_tolerance:
            return _final(Status.OPTIMAL, incumbent, res.objective, incumbent_x,
                          nodes_explored, cuts_added, t0)

    # root separation rounds
    sep = cfg.separator_config
    model_cur = model
    sep_deadline = time.monotonic() + 0.25 * cfg.time_limit
    if sep is not None and isinstance(sep, SeparatorConfig) and sep.any_enabled():
        if dive is not None:
            # the dive moved the engine off the root basis; tableau access
            # requires factor and LP state to agree, so restore it first
            res = engine.solve(root_lo, root_up, basis=res.basis, vstat=res.vstat,
                               deadline=deadline)
        existing = _row_keys(model_cur)
        for _ in range(sep.max_passes):
            if res.status != "optimal":
                break
            if _integral(res.x, int_cols, cfg.integrality_tolerance):
                break
            if time.monotonic() > sep_deadline:
                break
            new_cuts = separate_cuts(res, model_cur, sep, engine=engine,
                                     existing_keys=existing)
            if not new_cuts:
                break
            candidate = model_cur.with_extra_rows(
                [c.coefs for c in new_cuts], [c.sense for c in new_cuts],
                [c.rhs for c in new_cuts], [c.family for c in new_cuts])
            basis, vstat = _extend_basis(res.basis, res.vstat, model.num_cols,
                                         candidate.num_rows, len(new_cuts))
            engine2 = SimplexEngine(candidate, feas_tol=cfg.feasibility_tolerance,
                                    opt_tol=min(1e-7, cfg.gap_tolerance))
            res2 = engine2.solve(root_lo, root_up, basis=basis, vstat=vstat, deadline=deadline)
            if res2.status != "optimal":
                res2 = engine2.solve(root_lo, root_up, deadline=deadline)
            if res2.status != "optimal":
                # numerically unusable round: keep the pre-cut state
                res = engine.solve(root_lo, root_up, basis=res.basis, vstat=res.vstat,
                                   deadline=deadline)
                break
            model_cur, engine, res = candidate, engine2, res2
            cuts_added += len(new_cuts)
            _trace(f"root: added {len(new_cuts)} cuts, bound {res.objective:.9g}")
            best_dual = max(best_dual, res.objective)
            if incumbent is not None and mip_gap(incumbent, res.objective) <= cfg.gap_tolerance:
                return _final(Status.OPTIMAL, incumbent, res.objective, incumbent_x,
                              nodes_explored, cuts_added, t0)

    if res.status != "optimal":
        if incumbent is not None:
            return _final(Status.TIME_LIMIT, incumbent, best_dual, incumbent_x,
                          nodes_explored, cuts_added, t0)
        status = Status.TIME_LIMIT if res.status == "timelimit" else Status.INFEASIBLE
        return _final(status, None, best_dual, None, nodes_explored, cuts_added, t0)

    root_obj = res.objective

    if _integral(res.x, int_cols, cfg.integrality_tolerance):
        zee = res.objective
        if incumbent is None or zee < incumbent:
            incumbent, incumbent_x = zee, res.x.copy()
        return _final(Status.OPTIMAL, incumbent, incumbent, incumbent_x,
                      nodes_explored, cuts_added, t0)

    tree = _Tree()
    seq = 0
    root_node = _Node(bound=root_obj, seq=seq, depth=0, overrides={},
                      basis=res.basis, vstat=res.vstat)
    # branch the root immediately: children inherit the root basis
    _branch(tree, root_node, res, int_cols, prio, model_cur, cfg, seq_base=seq)
    seq += 2
    next_dive_at = 25
    reeval_at = min(1000, max(1, cfg.node_limit // 5))
    reeval_done = False
    snap_dual = tree.min_bound()
    snap_incumbent = incumbent

    while len(tree):
        if time.monotonic() > deadline:
            return _final(Status.TIME_LIMIT, incumbent, min(tree.min_bound(),
                          incumbent if incumbent is not None else math.inf),
                          incumbent_x, nodes_explored, cuts_added, t0)
        if nodes_explored >= cfg.node_limit:
            return _final(Status.ITERATION_LIMIT, incumbent, min(tree.min_bound(),
                          incumbent if incumbent is not None else math.inf),
                          incumbent_x, nodes_explored, cuts_added, t0)

        if incumbent is not None:
            # nodes that cannot improve the incumbent by more than half the gap
            # tolerance are not worth proving out
            cutoff = incumbent - 0.5 * cfg.gap_tolerance * max(1.0, abs(incumbent))
            dual = min(tree.min_bound(), incumbent)
            if mip_gap(incumbent, dual) <= cfg.gap_tolerance:
                return _final(Status.OPTIMAL, incumbent, dual, incumbent_x,
                              nodes_explored, cuts_added, t0)
        else:
            cutoff = math.inf

        # keep the plunge chain alive even after an incumbent exists: children
        # reuse the engine's current factorization, which halves node cost
        plunging = cfg.node_selection == "depth-first-then-best"
        node = tree.pop(prefer_stack=plunging)
        if node is None:
            break
        if node.bound >= cutoff:
            continue

        lo, up = root_lo.copy(), root_up.copy()
        for c, (l, u) in node.overrides.items():
            lo[c], up[c] = l, u
        basis, vstat = node.basis, node.vstat
        if basis is not None and len(basis) != engine.m:
            basis, vstat = _extend_basis(basis, vstat, model.num_cols,
                                         engine.m, engine.m - len(basis))
        res = engine.solve(lo, up, basis=basis, vstat=vstat, deadline=deadline)
        nodes_explored += 1
        _trace(f"node {nodes_explored} depth {node.depth} bound {node.bound:.9g} -> {res.status}")

        if res.status == "timelimit":
            tree.push(node, plunge=False)  # unresolved: keep its bound in the open set
            return _final(Status.TIME_LIMIT, incumbent,
                          min(tree.min_bound(), incumbent if incumbent is not None else math.inf),
                          incumbent_x, nodes_explored, cuts_added, t0)
        if res.status == "iterlimit":
            raise LpNumericalFailure(f"node LP exhausted its iteration budget at node {nodes_explored}")
        if res.status in ("infeasible", "unbounded"):
            continue
        node_obj = max(res.objective, node.bound)  # child cannot beat its parent
        if node_obj >= cutoff:
            continue
        if _integral(res.x, int_cols, cfg.integrality_tolerance):
            if incumbent is None or res.objective < incumbent - _IMPROVE_EPS * max(1.0, abs(incumbent)):
                incumbent, incumbent_x = res.objective, res.x.copy()
                _trace(f"incumbent {incumbent:.9g} at node {nodes_explored}")
                tree.prune(incumbent - 0.5 * cfg.gap_tolerance * max(1.0, abs(incumbent)))
            continue

        if (not reeval_done and nodes_explored >= reeval_at and sep is not None
                and isinstance(sep, SeparatorConfig) and sep.any_enabled()):
            reeval_done = True
            stalled = (incumbent == snap_incumbent
                       and abs(tree.min_bound() - snap_dual) < 1e-3 * max(1.0, abs(snap_dual)))
            if stalled:
                new_cuts = separate_cuts(res, model_cur, sep, engine=engine,
                                         structural_only=True)
                if new_cuts:
                    model_cur = model_cur.with_extra_rows(
                        [c.coefs for c in new_cuts], [c.sense for c in new_cuts],
                        [c.rhs for c in new_cuts], [c.family for c in new_cuts])
                    cuts_added += len(new_cuts)
                    _trace(f"re-evaluation: added {len(new_cuts)} structural cuts")
                    engine = SimplexEngine(model_cur, feas_tol=cfg.feasibility_tolerance,
                                           opt_tol=min(1e-7, cfg.gap_tolerance))
                    basis, vstat = _extend_basis(res.basis, res.vstat, model.num_cols,
                                                 model_cur.num_rows, len(new_cuts))
                    res = engine.solve(lo, up, basis=basis, vstat=vstat, deadline=deadline)
                    if res.status != "optimal":
                        continue
                    if _integral(res.x, int_cols, cfg.integrality_tolerance):
                        if incumbent is None or res.objective < incumbent:
                            incumbent, incumbent_x = res.objective, res.x.copy()
                        continue

        if nodes_explored >= next_dive_at:
            next_dive_at *= 4
            dive = _rounding_dive(engine, lo, up, res, int_cols, dive_cols,
                                  cfg.integrality_tolerance, deadline)
            if dive is not None and (incumbent is None
                                     or dive[0] < incumbent - _IMPROVE_EPS * max(1.0, abs(incumbent))):
                incumbent, incumbent_x = dive
                _trace(f"dive incumbent {incumbent:.9g} at node {nodes_explored}")
                tree.prune(incumbent - 0.5 * cfg.gap_tolerance * max(1.0, abs(incumbent)))

        node.bound = node_obj
        node.basis, node.vstat = res.basis, res.vstat
        _branch(tree, node, res, int_cols, prio, model_cur, cfg, seq_base=seq)
        seq += 2

    if incumbent is None:
        return _final(Status.INFEASIBLE, None, math.inf, None, nodes_explored, cuts_added, t0)
    return _final(Status.OPTIMAL, incumbent, incumbent, incumbent_x,
                  nodes_explored, cuts_added, t0)


def _final(status: Status, z_p, z_d, x, nodes: int, ncuts: int, t0: float) -> SolveResult:
    if z_p is not None and status in (Status.TIME_LIMIT, Status.ITERATION_LIMIT):
        z_d = min(z_d, z_p)
    gap = mip_gap(z_p, z_d) if z_p is not None else math.inf
    return SolveResult(status=status, incumbent_value=z_p, dual_bound=z_d, gap=gap,
                       assignment=None if x is None else np.asarray(x),
                       nodes_explored=nodes, cuts_added=ncuts,
                       wall_time=time.perf_counter() - t0)


def _integral(x: np.ndarray, int_cols: np.ndarray, tol: float) -> bool:
    if len(int_cols) == 0:
        return True
    v = x[int_cols]
    return bool(np.max(np.abs(v - np.round(v))) <= tol)


def _fractional_cols(x: np.ndarray, int_cols: np.ndarray, tol: float) -> np.ndarray:
    v = x[int_cols]
    mask = np.abs(v - np.round(v)) > tol
    return int_cols[mask]


def _branch(tree: _Tree, node: _Node, res, int_cols, prio, model: MilpModel,
            cfg: SolverConfig, seq_base: int) -> None:
    cand = _fractional_cols(res.x, int_cols, cfg.integrality_tolerance)
    if len(cand) == 0:
        return
    xv = res.x[cand]
    frac = xv - np.floor(xv)
    dist = np.minimum(frac, 1.0 - frac)
    absobj = np.abs(model.col_obj[cand])
    order = np.lexsort((cand, -absobj, -dist, -prio[cand]))
    j = int(cand[order[0]])
    val = float(res.x[j])
    f = val - math.floor(val)
    cur_lo, cur_up = _ov(node, j, model)

    down = _Node(bound=res.objective, seq=seq_base + 1, depth=node.depth + 1,
                 overrides={**node.overrides, j: (cur_lo, float(math.floor(val)))},
                 basis=res.basis, vstat=res.vstat)
    up = _Node(bound=res.objective, seq=seq_base + 2, depth=node.depth + 1,
               overrides={**node.overrides, j: (float(math.ceil(val)), cur_up)},
               basis=res.basis, vstat=res.vstat)
    plunge_child, other = (up, down) if f >= 0.5 else (down, up)
    tree.push(other, plunge=False)
    tree.push(plunge_child, plunge=True)


def _ov(node: _Node, j: int, model: MilpModel) -> tuple[float, float]:
    if j in node.overrides:
        return node.overrides[j]
    return float(model.col_lower[j]), float(model.col_upper[j])


def _extend_basis(basis: np.ndarray, vstat: np.ndarray, n: int, m_new: int,
                  added: int) -> tuple[np.ndarray, np.ndarray]:
    """Extend a stored basis after cut rows were appended: new slacks enter basic.

    Column layout is [structural | slacks | artificials], so appending rows
    shifts the artificial block; remap any artificial references.
    """
    m_old = len(basis)
    shift = m_new - m_old
    basis2 = np.concatenate([basis, np.arange(n + m_old, n + m_new, dtype=np.int64)])
    art = basis2 >= n + m_old
    art[m_old:] = False  # the freshly appended entries are the new slacks
    basis2[art] += shift
    v_struct = vstat[:n]
    v_slack_old = vstat[n:n + m_old]
    v_art_old = vstat[n + m_old:]
    vstat2 = np.concatenate([
        v_struct,
        v_slack_old, np.zeros(shift, dtype=np.int8),            # new cut slacks: basic
        v_art_old, np.full(shift, 1, dtype=np.int8),            # new artificials: at lower
    ])
    return basis2, vstat2


def _rounding_dive(engine: SimplexEngine, root_lo, root_up, root_res, int_cols,
                   dive_cols, tol: float, deadline: float, hint_arr=None):
    """Deterministic fix-and-resolve dive; returns (objective, x) or None.

    Only columns in `dive_cols` get fixed (e.g. the commitment block of a UC
    model, whose logic rows then force the remaining binaries integral); the
    result only counts when every integer column lands integral. The third
    attempt fixes the dive columns straight onto the caller's start hint, a
    feasibility-repaired pattern.
    """
    best = None
    for mode in ("hint", "nearest", "ceil"):
        if mode == "hint" and hint_arr is None:
            continue
        if mode == "ceil" and best is not None:
            continue  # rounding attempts already produced an incumbent
        lo, up = root_lo.copy(), root_up.copy()
        cur = root_res
        ok = True
        if mode == "hint":
            from .simplex import AT_UPPER
            fixable = dive_cols[hint_arr[dive_cols] >= 0]
            want = (hint_arr[fixable] == AT_UPPER).astype(float)
            # only pin hints compatible with the current bounds
            okmask = (want >= lo[fixable] - tol) & (want <= up[fixable] + tol)
            cols = fixable[okmask]
            lo[cols] = want[okmask]
            up[cols] = want[okmask]
            cur = engine.solve(lo, up, basis=cur.basis, vstat=cur.vstat,
                               max_iter=12000, deadline=deadline)
            if cur.status != "optimal":
                continue
        else:
            for _ in range(20):
                if time.monotonic() > deadline:
                    break
                cand = _fractional_cols(cur.x, dive_cols, tol)
                if len(cand) == 0:
                    break
                vals = cur.x[cand]
                fixed = np.round(vals) if mode == "nearest" else np.ceil(vals - tol)
                lo[cand] = fixed
                up[cand] = fixed
                cur = engine.solve(lo, up, basis=cur.basis, vstat=cur.vstat,
                                   max_iter=8000, deadline=deadline)
                if cur.status != "optimal":
                    ok = False
                    break
            if not (ok and cur.status == "optimal"):
                continue
        if len(_fractional_cols(cur.x, int_cols, tol)) == 0:
            if best is None or cur.objective < best[0]:
                best = (cur.objective, cur.x.copy())
    return best
