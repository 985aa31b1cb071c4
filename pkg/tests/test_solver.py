import itertools
import math

import numpy as np
import pytest

from airv2g import solver
from airv2g.lpcore import INF, LpModel
from airv2g.solver import (
    OPTIMAL,
    INFEASIBLE,
    UNBOUNDED,
    ITERATION_LIMIT,
    ReferenceSizeError,
    SolverConfig,
    dual_bound,
    infeasibility_certificate,
    reference_solve,
    solve,
    verify,
)

from conftest import solve_scenario, toy_scenario


def hand_model(a_rows, a_cols, a_vals, row_b, col_b, c, n):
    rl, ru = zip(*row_b) if row_b else ((), ())
    cl, cu = zip(*col_b)
    return LpModel(
        n_cols=n,
        a_rows=np.asarray(a_rows, dtype=np.int64),
        a_cols=np.asarray(a_cols, dtype=np.int64),
        a_vals=np.asarray(a_vals, dtype=float),
        row_lower=np.asarray(rl, dtype=float),
        row_upper=np.asarray(ru, dtype=float),
        col_lower=np.asarray(cl, dtype=float),
        col_upper=np.asarray(cu, dtype=float),
        objective=np.asarray(c, dtype=float),
        row_group=[f"g{r}" for r in range(len(row_b))],
        row_label=[f"r{r}" for r in range(len(row_b))],
    )


def textbook_lp():
    # min x + y  s.t.  x + y >= 1,  x, y >= 0
    return hand_model(
        [0, 0], [0, 1], [1.0, 1.0], [(1.0, INF)], [(0.0, INF), (0.0, INF)], [1.0, 1.0], 2
    )


def test_reference_textbook():
    out = reference_solve(textbook_lp())
    assert out.status == OPTIMAL
    assert out.objective == pytest.approx(1.0, abs=1e-9)


def test_reference_bland_rule_textbook():
    out = reference_solve(textbook_lp(), SolverConfig(backend="reference", pivot_rule="bland"))
    assert out.status == OPTIMAL
    assert out.objective == pytest.approx(1.0, abs=1e-9)


def test_reference_deterministic_bit_stable():
    model, _ = solve_scenario(toy_scenario(), backend="external")
    a = reference_solve(model)
    b = reference_solve(model)
    assert np.array_equal(a.primal, b.primal)
    assert a.objective == b.objective
    assert a.iterations == b.iterations


def test_reference_size_guard():
    model = hand_model([], [], [], [(0.0, 0.0)], [(0.0, INF)] * 5001, [0.0] * 5001, 5001)
    with pytest.raises(ReferenceSizeError, match="refuses"):
        reference_solve(model)


def test_reference_infeasible():
    model = hand_model([0], [0], [1.0], [(2.0, INF)], [(0.0, 1.0)], [1.0], 1)
    out = reference_solve(model)
    assert out.status == INFEASIBLE
    assert infeasibility_certificate(model) > 1e-6


def test_reference_unbounded():
    model = hand_model([], [], [], [], [(0.0, INF)], [-1.0], 1)
    out = reference_solve(model)
    assert out.status == UNBOUNDED


def test_iteration_limit_status():
    model, _ = solve_scenario(toy_scenario(), backend="external")
    out = reference_solve(model, SolverConfig(backend="reference", max_iterations=5))
    assert out.status == ITERATION_LIMIT
    assert "5" in out.message


def vertex_enumeration_min(A, b_lo, b_hi, lo, hi, c):
    """Enumerate candidate vertices as intersections of n active constraints.

    Independent optimum oracle for tiny dense LPs: every vertex of the feasible
    polyhedron is the unique solution of n linearly independent active
    constraints chosen among rows (at either bound) and variable bounds.
    """
    m, n = A.shape
    planes = []  # (normal, offset)
    for r in range(m):
        if math.isfinite(b_lo[r]):
            planes.append((A[r], b_lo[r]))
        if math.isfinite(b_hi[r]) and b_hi[r] != b_lo[r]:
            planes.append((A[r], b_hi[r]))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        if math.isfinite(lo[j]):
            planes.append((e, lo[j]))
        if math.isfinite(hi[j]) and hi[j] != lo[j]:
            planes.append((e.copy(), hi[j]))
    best = math.inf
    for combo in itertools.combinations(range(len(planes)), n):
        M = np.array([planes[i][0] for i in combo])
        rhs = np.array([planes[i][1] for i in combo])
        if abs(np.linalg.det(M)) < 1e-9:
            continue
        x = np.linalg.solve(M, rhs)
        ax = A @ x
        feas = (
            (ax >= b_lo - 1e-7).all()
            and (ax <= b_hi + 1e-7).all()
            and (x >= lo - 1e-7).all()
            and (x <= hi + 1e-7).all()
        )
        if feas:
            best = min(best, float(c @ x))
    return best


@pytest.mark.parametrize("seed", range(10))
def test_reference_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    m = int(rng.integers(1, 5))
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    b_lo = np.full(m, -INF)
    b_hi = rng.integers(1, 8, size=m).astype(float)
    lo = np.zeros(n)
    hi = rng.integers(2, 6, size=n).astype(float)  # bounded: optimum exists
    c = rng.integers(-4, 5, size=n).astype(float)
    rows, cols = np.nonzero(A)
    model = hand_model(
        rows,
        cols,
        A[rows, cols],
        list(zip(b_lo, b_hi)),
        list(zip(lo, hi)),
        c,
        n,
    )
    expected = vertex_enumeration_min(A, b_lo, b_hi, lo, hi, c)
    out = reference_solve(model)
    assert out.status == OPTIMAL
    assert out.objective == pytest.approx(expected, abs=1e-7)
    ext = solve(model, SolverConfig(backend="external"))
    assert ext.objective == pytest.approx(expected, abs=1e-7)


def test_backend_agreement_on_toy():
    model, ext = solve_scenario(toy_scenario(), backend="external")
    ref = reference_solve(model)
    assert ref.status == ext.status == OPTIMAL
    rel = abs(ref.objective - ext.objective) / (1.0 + abs(ext.objective))
    assert rel <= 1e-6


def test_verify_passes_on_reference_solution():
    model, _ = solve_scenario(toy_scenario(), backend="external")
    out = reference_solve(model)
    report = verify(model, out)
    assert report.passed, str(report)


def test_verify_flags_bound_violation_with_column_name():
    model, out = solve_scenario(toy_scenario(), backend="external")
    x = out.primal.copy()
    j = model.index.pgr("AAA", 3)
    x[j] = model.col_upper[j] + 1e-3
    bad = solver.SolveOutcome(
        status=OPTIMAL, primal=x, dual=None, objective=out.objective,
        iterations=0, wall_time=0.0,
    )
    report = verify(model, bad)
    assert not report.passed
    failing = dict((name, detail) for name, ok, detail in report.checks if not ok)
    assert "column_bounds" in failing
    assert "Pgr_AAA_k3" in failing["column_bounds"]


def test_duality_gap_within_tolerance():
    model, out = solve_scenario(toy_scenario(), backend="external")
    assert out.dual is not None
    lb = dual_bound(model, out.dual)
    assert math.isfinite(lb)
    assert abs(out.objective - lb) <= 1e-6 * (1 + abs(out.objective))
    ref = reference_solve(model)
    assert ref.dual is not None
    lb_ref = dual_bound(model, ref.dual)
    assert abs(ref.objective - lb_ref) <= 1e-6 * (1 + abs(ref.objective))


def test_infeasibility_certificate_zero_for_feasible():
    model, _ = solve_scenario(toy_scenario(), backend="external")
    assert infeasibility_certificate(model) <= 1e-7


def test_solution_csv(tmp_path):
    model, out = solve_scenario(toy_scenario(), backend="external")
    path = tmp_path / "solution.csv"
    solver.write_solution_csv(model, out, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "column_name,value"
    assert len(lines) == model.n_cols + 1
    assert lines[1].startswith("Eb_0_k0,")
