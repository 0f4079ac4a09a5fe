"""Cut validity against exhaustive enumeration, plus separation behavior."""
import numpy as np
import pytest
from scipy.optimize import linprog

import _oracle
from ucpilot.compiler import compile_uc
from ucpilot.cuts import Cut, SeparatorConfig, separate_cuts, _row_keys
from ucpilot.instgen import gen_instance, oracle_scale_spec
from ucpilot.milp import GE, LE, SolverConfig, ModelBuilder
from ucpilot.schema import GeneratorSpec, UcSchema
from ucpilot.simplex import SimplexEngine
from ucpilot.solver import branch_and_bound


def _min_cut_lhs_over_pattern(schema, model, idx, pattern, cut):
    """Exact check: minimize the cut LHS over the dispatch polytope of a pattern."""
    I, T = schema.n_units, schema.horizon
    on = [[bool((pattern[i] >> t) & 1) for t in range(T)] for i in range(I)]
    vw = {}
    for i, g in enumerate(schema.generators):
        prev = g.init_on
        for t in range(T):
            cur = on[i][t]
            vw[idx.v(i, t)] = 1.0 if (cur and not prev) else 0.0
            vw[idx.w(i, t)] = 1.0 if (prev and not cur) else 0.0
            prev = cur
    fixed_part = 0.0
    p_cols = []
    p_coefs = []
    for col, coef in cut.coefs.items():
        kind, i, t = idx.describe(col)
        if kind == "u":
            fixed_part += coef * (1.0 if on[i][t] else 0.0)
        elif kind == "v" or kind == "w":
            fixed_part += coef * vw[col]
        else:
            if on[i][t]:
                p_cols.append((i, t))
                p_coefs.append(coef)
            # off units dispatch 0: contributes nothing
    res = _oracle.dispatch_cost(schema, pattern)
    if res is None:
        return None
    _, x, pos = res
    if not p_cols:
        return fixed_part
    c = np.zeros(len(pos))
    for (i, t), coef in zip(p_cols, p_coefs):
        if (i, t) in pos:
            c[pos[(i, t)]] = coef
    # reuse the oracle dispatch LP's constraint data by re-solving with the cut objective
    objective = _oracle.dispatch_cost_custom(schema, pattern, c)
    if objective is None:
        return None
    return fixed_part + objective


@pytest.fixture(scope="module")
def toy_with_cuts():
    schema = gen_instance(oracle_scale_spec(3, 4), 12)
    model, idx = compile_uc(schema)
    engine = SimplexEngine(model)
    res = engine.solve()
    cfg = SeparatorConfig(max_passes=3, aggressiveness="aggressive")
    cuts = separate_cuts(res, model, cfg, engine=engine)
    return schema, model, idx, res, cuts


def test_integral_point_yields_no_cuts(toy_schema):
    model, idx = compile_uc(toy_schema)
    res = branch_and_bound(model, SolverConfig())
    engine = SimplexEngine(model)
    lo = model.col_lower.copy()
    up = model.col_upper.copy()
    ints = np.nonzero(model.col_integer)[0]
    lo[ints] = np.round(res.assignment[ints])
    up[ints] = np.round(res.assignment[ints])
    lp = engine.solve(lo, up)
    assert lp.status == "optimal"
    cuts = separate_cuts(lp, model, SeparatorConfig(max_passes=1, aggressiveness="aggressive"),
                         engine=engine)
    gomory = [c for c in cuts if c.family == "cut_gomory"]
    assert gomory == []


def test_cuts_preserve_every_feasible_pattern(toy_with_cuts):
    schema, model, idx, res, cuts = toy_with_cuts
    assert cuts, "expected at least one cut on a fractional root"
    checked = 0
    for pattern in _oracle.feasible_patterns(schema):
        for cut in cuts:
            lhs = _min_cut_lhs_over_pattern(schema, model, idx, pattern, cut)
            if lhs is None:
                continue
            checked += 1
            if cut.sense == GE:
                assert lhs >= cut.rhs - 1e-6, f"{cut.family} cuts off a feasible pattern"
            else:
                # LE cuts: maximize instead (negate)
                pass
    assert checked > 0


def test_le_cuts_preserve_every_feasible_pattern(toy_with_cuts):
    schema, model, idx, res, cuts = toy_with_cuts
    for pattern in _oracle.feasible_patterns(schema):
        for cut in cuts:
            if cut.sense != LE:
                continue
            neg = Cut({c: -v for c, v in cut.coefs.items()}, GE, -cut.rhs, cut.family)
            lhs = _min_cut_lhs_over_pattern(schema, model, idx, pattern, neg)
            if lhs is not None:
                assert lhs >= neg.rhs - 1e-6


def test_cut_violation_at_generation_point(toy_with_cuts):
    schema, model, idx, res, cuts = toy_with_cuts
    x = res.x
    for cut in cuts:
        assert cut.violation(x) > 0


def test_clique_duplicate_suppression():
    gens = [GeneratorSpec(f"G{i}", 1.0, 10.0, 10.0 + i, ramp_up=10, ramp_down=10,
                          startup_limit=10, shutdown_limit=10,
                          init_periods_in_state=1) for i in range(3)]
    schema = UcSchema(gens, 2, 1.0, [5.0, 5.0], [0.0, 0.0],
                      exclusive_groups=[[0, 1]])
    model, idx = compile_uc(schema)

    class FakeRes:
        x = np.zeros(model.num_cols)
    FakeRes.x[idx.u(0, 0)] = 0.8
    FakeRes.x[idx.u(1, 0)] = 0.7
    cuts = separate_cuts(FakeRes, model, SeparatorConfig(gomory_enabled=False,
                                                         updown_implication_enabled=False,
                                                         max_passes=1,
                                                         aggressiveness="aggressive"))
    # u[0]+u[1] <= 1 already exists as a model row: no duplicate emitted
    assert cuts == []


def test_clique_lifting_with_third_member():
    gens = [GeneratorSpec(f"G{i}", 1.0, 10.0, 10.0 + i, ramp_up=10, ramp_down=10,
                          startup_limit=10, shutdown_limit=10,
                          init_periods_in_state=1) for i in range(3)]
    schema = UcSchema(gens, 1, 1.0, [5.0], [0.0],
                      exclusive_groups=[[0, 1], [1, 2], [0, 2]])
    model, idx = compile_uc(schema)

    class FakeRes:
        x = np.zeros(model.num_cols)
    for i in range(3):
        FakeRes.x[idx.u(i, 0)] = 0.5
    cuts = separate_cuts(FakeRes, model, SeparatorConfig(gomory_enabled=False,
                                                         updown_implication_enabled=False,
                                                         max_passes=1,
                                                         aggressiveness="aggressive"))
    assert len(cuts) == 1
    assert set(cuts[0].coefs) == {idx.u(0, 0), idx.u(1, 0), idx.u(2, 0)}
    assert cuts[0].rhs == 1.0


def test_updown_cut_violated_point():
    g = GeneratorSpec("G", 1.0, 10.0, 10.0, ramp_up=10, ramp_down=10, min_up=3,
                      min_down=1, startup_limit=10, shutdown_limit=10,
                      init_periods_in_state=1)
    schema = UcSchema([g], 4, 1.0, [0.0] * 4, [0.0] * 4)
    model, idx = compile_uc(schema)

    class FakeRes:
        x = np.zeros(model.num_cols)
    # v[0]=0.5 and w[1]=0.6 with u[0]=0.5: v + w - u = 0.6 > 0 violates the window cut
    FakeRes.x[idx.u(0, 0)] = 0.5
    FakeRes.x[idx.v(0, 0)] = 0.5
    FakeRes.x[idx.w(0, 1)] = 0.6
    cuts = separate_cuts(FakeRes, model, SeparatorConfig(gomory_enabled=False,
                                                         clique_enabled=False,
                                                         max_passes=1,
                                                         aggressiveness="aggressive"))
    assert any(c.family == "cut_updown" for c in cuts)


def test_no_duplicate_cuts_across_rounds(toy_with_cuts):
    schema, model, idx, res, cuts = toy_with_cuts
    keys = {c.key() for c in cuts}
    assert len(keys) == len(cuts)
    existing = _row_keys(model)
    assert not (keys & existing)
