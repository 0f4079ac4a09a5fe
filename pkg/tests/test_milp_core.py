import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ucpilot.milp import (EQ, GE, LE, MilpModel, ModelBuilder, ModelMalformed,
                          SolverConfig, Status, mip_gap)
from ucpilot.simplex import LpNumericalFailure, solve_lp
from ucpilot.solver import branch_and_bound


def _lp(c, rows, senses, rhs, bounds):
    b = ModelBuilder()
    for j, (lo, hi) in enumerate(bounds):
        b.add_column(f"x{j}", lo, hi, c[j])
    for row, s, r in zip(rows, senses, rhs):
        b.add_row(row, s, r, "row")
    return b.build()


class TestSolveLp:
    def test_minimize_x_above_three(self):
        model = _lp([1.0], [{0: 1.0}], [GE], [3.0], [(0.0, 10.0)])
        res = solve_lp(model)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(3.0)

    def test_symmetric_vertex(self):
        model = _lp([-1.0, -1.0], [{0: 1.0, 1: 1.0}], [LE], [1.0],
                    [(0.0, 1.0), (0.0, 1.0)])
        res = solve_lp(model)
        assert res.objective == pytest.approx(-1.0)

    def test_infeasible(self):
        model = _lp([1.0], [{0: 1.0}, {0: 1.0}], [GE, LE], [5.0, 2.0], [(0.0, 10.0)])
        assert solve_lp(model).status == "infeasible"

    def test_unbounded(self):
        model = _lp([-1.0], [{0: 1.0}], [GE], [0.0], [(0.0, math.inf)])
        assert solve_lp(model).status == "unbounded"

    def test_warm_start_reaches_same_optimum(self):
        model = _lp([-1.0, -2.0, -0.5], [{0: 1, 1: 1, 2: 1}], [LE], [1.5],
                    [(0, 1), (0, 1), (0, 1)])
        cold = solve_lp(model)
        warm = solve_lp(model, warm_basis=(cold.basis, cold.vstat))
        assert warm.objective == pytest.approx(cold.objective)
        assert warm.iterations <= cold.iterations

    def test_relaxation_bounds_toy(self, toy_schema):
        from ucpilot.compiler import compile_uc
        import _oracle
        model, _ = compile_uc(toy_schema)
        res = solve_lp(model)
        assert res.status == "optimal"
        assert res.objective <= _oracle.oracle_optimum(toy_schema) + 1e-6

    def test_reduced_cost_optimality(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            n, m = 8, 5
            b = ModelBuilder()
            for j in range(n):
                b.add_column(f"x{j}", 0.0, rng.uniform(1, 5), rng.normal())
            for i in range(m):
                coefs = {j: rng.normal() for j in range(n) if rng.random() < 0.6}
                if not coefs:
                    coefs = {int(rng.integers(n)): 1.0}
                b.add_row(coefs, int(rng.integers(0, 3)), rng.normal(), "r")
            model = b.build()
            res = solve_lp(model)
            if res.status != "optimal":
                continue
            d = res.reduced_costs[:model.num_cols]
            vstat = res.vstat[:model.num_cols]
            movable = model.col_upper > model.col_lower
            # at optimality: at-lower nonbasics price >= -tol, at-upper <= +tol
            assert np.all(d[(vstat == 1) & movable] >= -1e-7)
            assert np.all(d[(vstat == 2) & movable] <= 1e-7)


class TestModelValidation:
    def test_duplicate_row_ids_rejected(self):
        import scipy.sparse as sp
        rows = sp.csr_matrix((np.array([1.0, 2.0]), np.array([0, 0]),
                              np.array([0, 2])), shape=(1, 1))
        model = MilpModel(
            col_lower=np.array([0.0]), col_upper=np.array([1.0]),
            col_obj=np.array([1.0]), col_integer=np.array([False]),
            col_names=["x"], rows=rows, row_sense=np.array([0], dtype=np.int8),
            row_rhs=np.array([1.0]), row_families=["r"])
        with pytest.raises(ModelMalformed):
            model.validate()

    def test_bound_order_rejected(self):
        b = ModelBuilder()
        b.add_column("x", 2.0, 1.0, 0.0)
        with pytest.raises(ModelMalformed):
            b.build()

    def test_nonfinite_rejected(self):
        b = ModelBuilder()
        b.add_column("x", 0.0, 1.0, math.nan)
        with pytest.raises(ModelMalformed):
            b.build()


class TestMipGap:
    def test_basic(self):
        assert mip_gap(100.0, 95.0) == pytest.approx(0.05)

    def test_zero_zero(self):
        assert mip_gap(0.0, 0.0) == 0.0

    def test_zero_primal_sentinel(self):
        assert mip_gap(0.0, -1.0) == math.inf

    @given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
    def test_nonnegative_and_symmetric_in_sign(self, zp, zd):
        g = mip_gap(zp, zd)
        assert g >= 0.0
        if zp != 0:
            assert g == pytest.approx(abs(zp - zd) / abs(zp))


class TestBranchAndBound:
    def test_pure_lp_model(self):
        model = _lp([1.0], [{0: 1.0}], [GE], [3.0], [(0.0, 10.0)])
        res = branch_and_bound(model, SolverConfig())
        assert res.status == Status.OPTIMAL
        assert res.incumbent_value == pytest.approx(3.0)
        assert res.nodes_explored == 1

    def test_knapsack(self):
        # max 5a+4b+3c s.t. 2a+3b+c <= 4, binaries -> min form
        b = ModelBuilder()
        for j, c in enumerate([-5.0, -4.0, -3.0]):
            b.add_column(f"x{j}", 0, 1, c, integer=True)
        b.add_row({0: 2.0, 1: 3.0, 2: 1.0}, LE, 4.0, "cap")
        res = branch_and_bound(b.build(), SolverConfig())
        assert res.status == Status.OPTIMAL
        assert res.incumbent_value == pytest.approx(-8.0)  # {a, c} by enumeration

    def test_infeasible_integer_model(self):
        b = ModelBuilder()
        b.add_column("x", 0, 1, 1.0, integer=True)
        b.add_row({0: 1.0}, GE, 0.5, "r")
        b.add_row({0: 1.0}, LE, 0.6, "r")
        res = branch_and_bound(b.build(), SolverConfig())
        assert res.status == Status.INFEASIBLE
        assert res.assignment is None

    def test_gap_matches_mip_gap_exactly(self, toy_schema):
        from ucpilot.compiler import compile_uc
        model, _ = compile_uc(toy_schema)
        res = branch_and_bound(model, SolverConfig())
        assert res.gap == mip_gap(res.incumbent_value, res.dual_bound)

    def test_determinism(self, toy_schema):
        from ucpilot.compiler import compile_uc
        model, _ = compile_uc(toy_schema)
        cfg = SolverConfig(rng_seed=7)
        a = branch_and_bound(model, cfg)
        b = branch_and_bound(model, cfg)
        assert a.nodes_explored == b.nodes_explored
        assert a.incumbent_value == b.incumbent_value
        assert a.dual_bound == b.dual_bound

    def test_dual_bound_sandwich(self, toy_schema):
        from ucpilot.compiler import compile_uc
        model, _ = compile_uc(toy_schema)
        res = branch_and_bound(model, SolverConfig())
        zp = res.incumbent_value
        assert res.dual_bound <= zp + 1e-9 * max(1.0, abs(zp))
