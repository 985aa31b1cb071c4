"""LP solving: external backend, self-contained reference simplex, verification.

The reference solver is the correctness anchor for desk-scale instances: a
two-phase revised simplex with deterministic pivoting, max-norm
equilibration, and a hard size guard.  The external backend wraps an
off-the-shelf solver behind the same narrow contract; everything here also
runs with only the reference solver present.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from .lpcore import INF, LpModel, residuals

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"


class ReferenceSizeError(ValueError):
    """Model too large for the dense reference solver."""


@dataclass
class SolverConfig:
    feasibility_tol: float = 1e-6
    optimality_tol: float = 1e-6
    max_iterations: int = 200_000
    backend: str = "auto"  # "reference" | "external" | "auto"
    # Pivot choice for the reference solver.  "bland" is the guaranteed-
    # terminating textbook rule; "hybrid" starts from the steepest (Dantzig)
    # rule and switches to Bland permanently once the objective stalls, which
    # keeps the termination guarantee at practical speed.
    pivot_rule: str = "hybrid"
    stall_limit: int = 2000

    def __post_init__(self):
        if self.feasibility_tol <= 0 or self.optimality_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class SolveOutcome:
    status: str
    primal: np.ndarray | None
    dual: np.ndarray | None
    objective: float | None
    iterations: int
    wall_time: float
    message: str = ""


def solve(model: LpModel, config: SolverConfig | None = None) -> SolveOutcome:
    """Solve under the configured backend; "auto" prefers the external solver."""
    config = config or SolverConfig()
    if config.backend == "reference":
        return reference_solve(model, config)
    if config.backend == "external":
        return _solve_external(model, config)
    try:
        return _solve_external(model, config)
    except ImportError:
        return reference_solve(model, config)


def _solve_external(model: LpModel, config: SolverConfig) -> SolveOutcome:
    import scipy.sparse as sp
    from scipy.optimize import linprog

    t0 = time.perf_counter()
    n = model.n_cols
    eq_rows, ub_rows, lb_rows = [], [], []
    for r in range(model.n_rows):
        lo, hi = model.row_lower[r], model.row_upper[r]
        if lo == hi:
            eq_rows.append(r)
        else:
            if math.isfinite(hi):
                ub_rows.append(r)
            if math.isfinite(lo):
                lb_rows.append(r)

    mat = sp.csr_matrix((model.a_vals, (model.a_rows, model.a_cols)), shape=(model.n_rows, n))
    A_eq = mat[eq_rows] if eq_rows else None
    b_eq = model.row_lower[eq_rows] if eq_rows else None
    ub_parts, ub_rhs = [], []
    if ub_rows:
        ub_parts.append(mat[ub_rows])
        ub_rhs.append(model.row_upper[ub_rows])
    if lb_rows:
        ub_parts.append(-mat[lb_rows])
        ub_rhs.append(-model.row_lower[lb_rows])
    A_ub = sp.vstack(ub_parts) if ub_parts else None
    b_ub = np.concatenate(ub_rhs) if ub_rhs else None

    bounds = list(zip(model.col_lower, model.col_upper))
    res = linprog(
        model.objective,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
    )
    if res.status == 4:
        # dual simplex can exit without a verdict on hard instances; the
        # interior-point variant settles optimal vs infeasible
        res = linprog(
            model.objective,
            A_ub=A_ub,
            b_ub=b_ub,
            A_eq=A_eq,
            b_eq=b_eq,
            bounds=bounds,
            method="highs-ipm",
        )
    wall = time.perf_counter() - t0
    status = {0: OPTIMAL, 1: ITERATION_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(
        res.status, ITERATION_LIMIT
    )
    dual = None
    if status == OPTIMAL:
        # marginals are objective sensitivities to the RHS; flip the rows we
        # negated so every original row carries d(objective)/d(bound)
        dual = np.zeros(model.n_rows)
        if eq_rows:
            dual[eq_rows] = res.eqlin.marginals
        if ub_rows or lb_rows:
            m_ub = np.asarray(res.ineqlin.marginals)
            if ub_rows:
                dual[ub_rows] += m_ub[: len(ub_rows)]
            if lb_rows:
                dual[lb_rows] += -m_ub[len(ub_rows) :]
    return SolveOutcome(
        status=status,
        primal=np.asarray(res.x) if res.x is not None else None,
        dual=dual,
        objective=float(res.fun) if status == OPTIMAL else None,
        iterations=int(getattr(res, "nit", 0) or 0),
        wall_time=wall,
        message=str(res.message),
    )


# ---------------------------------------------------------------------------
# dense reference simplex
# ---------------------------------------------------------------------------


class _StandardForm:
    """min c.z  s.t.  A z = b, z >= 0, with bookkeeping to map back.

    col_map entries: ("shift", std col, lower) for finite-lower columns,
    ("mirror", std col, upper) for upper-bounded-only columns, and
    ("split", plus col, minus col) for free columns.  row_of[r] lists the
    standard rows realizing original row r together with the sign each row
    kept through the b >= 0 normalization.
    """

    def __init__(self, A, b, c, n_struct, col_map, row_of):
        self.A = A
        self.b = b
        self.c = c
        self.n_struct = n_struct
        self.col_map = col_map
        self.row_of = row_of


def _to_standard_form(model: LpModel) -> _StandardForm:
    n = model.n_cols
    dense = np.zeros((model.n_rows, n))
    np.add.at(dense, (model.a_rows, model.a_cols), model.a_vals)

    cols: list[np.ndarray] = []
    c: list[float] = []
    col_map: list[tuple] = []
    upper: list[float] = []
    shift = np.zeros(model.n_rows)  # constant row activity from substitutions
    for j in range(n):
        lo, hi = model.col_lower[j], model.col_upper[j]
        if lo == hi:
            col_map.append(("fixed", -1, lo))  # substituted out entirely
            if lo != 0.0:
                shift += dense[:, j] * lo
        elif math.isfinite(lo):
            col_map.append(("shift", len(cols), lo))
            cols.append(dense[:, j])
            c.append(model.objective[j])
            upper.append(hi - lo if math.isfinite(hi) else INF)
            if lo != 0.0:
                shift += dense[:, j] * lo
        elif math.isfinite(hi):
            col_map.append(("mirror", len(cols), hi))
            cols.append(-dense[:, j])
            c.append(-model.objective[j])
            upper.append(INF)
            shift += dense[:, j] * hi
        else:
            col_map.append(("split", len(cols), len(cols) + 1))
            cols.append(dense[:, j])
            cols.append(-dense[:, j])
            c.append(model.objective[j])
            c.append(-model.objective[j])
            upper.append(INF)
            upper.append(INF)

    A_struct = np.column_stack(cols) if cols else np.zeros((model.n_rows, 0))
    n_struct = A_struct.shape[1]

    raw_rows: list[np.ndarray] = []
    raw_b: list[float] = []
    slack_sign: list[int] = []
    row_of: list[list[list]] = [[] for _ in range(model.n_rows)]
    for r in range(model.n_rows):
        lo, hi = model.row_lower[r], model.row_upper[r]
        if lo == hi:
            row_of[r].append([len(raw_rows), 1.0])
            raw_rows.append(A_struct[r])
            raw_b.append(lo - shift[r])
            slack_sign.append(0)
        else:
            if math.isfinite(hi):
                row_of[r].append([len(raw_rows), 1.0])
                raw_rows.append(A_struct[r])
                raw_b.append(hi - shift[r])
                slack_sign.append(1)
            if math.isfinite(lo):
                row_of[r].append([len(raw_rows), 1.0])
                raw_rows.append(A_struct[r])
                raw_b.append(lo - shift[r])
                slack_sign.append(-1)

    ub_rows = [(j, u) for j, u in enumerate(upper) if math.isfinite(u)]
    m = len(raw_rows) + len(ub_rows)
    n_slack = sum(1 for s in slack_sign if s != 0) + len(ub_rows)
    A = np.zeros((m, n_struct + n_slack))
    b = np.zeros(m)
    s_at = n_struct
    for i, row in enumerate(raw_rows):
        A[i, :n_struct] = row
        b[i] = raw_b[i]
        if slack_sign[i] != 0:
            A[i, s_at] = float(slack_sign[i])
            s_at += 1
    for t, (j, u) in enumerate(ub_rows):
        i = len(raw_rows) + t
        A[i, j] = 1.0
        A[i, s_at] = 1.0
        s_at += 1
        b[i] = u

    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    for entries in row_of:
        for ent in entries:
            if flip[ent[0]]:
                ent[1] = -1.0

    c_full = np.concatenate([np.asarray(c), np.zeros(n_slack)])
    return _StandardForm(A, b, c_full, n_struct, col_map, row_of)


def _equilibrate(A, b, c):
    """Max-norm row/column scaling with power-of-two factors (exact in floats)."""

    def pow2_inverse(v):
        e = np.where(v > 0, np.round(np.log2(np.where(v > 0, v, 1.0))), 0.0)
        return np.power(2.0, -e)

    r = np.ones(A.shape[0])
    s = np.ones(A.shape[1])
    for _ in range(2):
        f = pow2_inverse(np.abs(A).max(axis=1, initial=0.0))
        A = A * f[:, None]
        r *= f
        g = pow2_inverse(np.abs(A).max(axis=0, initial=0.0))
        A = A * g[None, :]
        s *= g
    return A, b * r, c * s, r, s


def reference_solve(model: LpModel, config: SolverConfig | None = None) -> SolveOutcome:
    """Revised two-phase simplex with an explicit basis inverse; the desk-scale oracle.

    The basis inverse is kept dense, updated in product form each pivot, and
    refactorized from scratch at a fixed cadence (and whenever the iterate
    misbehaves), so accumulated round-off is flushed instead of compounding.
    Deterministic for fixed input; refuses models beyond 5000 columns.
    """
    config = config or SolverConfig()
    if model.n_cols > 5000:
        raise ReferenceSizeError(
            f"reference solver refuses {model.n_cols} columns (guard is 5000)"
        )
    t0 = time.perf_counter()

    def done(status, x=None, dual=None, objective=None, iters=0, message=""):
        return SolveOutcome(
            status=status,
            primal=x,
            dual=dual,
            objective=objective,
            iterations=iters,
            wall_time=time.perf_counter() - t0,
            message=message,
        )

    sf = _to_standard_form(model)
    A0, b, c0, r_scale, c_scale = _equilibrate(sf.A, sf.b, sf.c)
    m, n_real = A0.shape

    # artificial identity columns for rows without a usable slack
    slack_on_row: dict[int, int] = {}
    for j in range(sf.n_struct, n_real):
        rows_j = np.nonzero(A0[:, j])[0]
        if len(rows_j) == 1 and A0[rows_j[0], j] > 0:
            slack_on_row[int(rows_j[0])] = j
    artificial_rows = [i for i in range(m) if i not in slack_on_row]
    n = n_real + len(artificial_rows)
    A = np.zeros((m, n))
    A[:, :n_real] = A0
    for t, i in enumerate(artificial_rows):
        A[i, n_real + t] = 1.0

    c_phase2 = np.concatenate([c0, np.zeros(len(artificial_rows))])
    c_phase1 = np.zeros(n)
    c_phase1[n_real:] = 1.0

    start_basis = np.empty(m, dtype=np.int64)
    for i in range(m):
        start_basis[i] = slack_on_row.get(i, -1)
    for t, i in enumerate(artificial_rows):
        start_basis[i] = n_real + t

    tol = 1e-9
    pivot_tol = 1e-7
    refactor_every = 192
    A_fortran = np.asfortranarray(A)  # contiguous columns for d = binv @ A[:, col]
    A_T = np.ascontiguousarray(A.T)  # contiguous rows for pricing

    def run(pivot_bland: bool):
        """One complete two-phase run; returns (status, basis, x_B, iters, msg)."""
        basis = start_basis.copy()
        binv = None
        x_B = None

        def refactor():
            nonlocal binv, x_B
            B = A[:, basis]
            try:
                binv = np.linalg.inv(B)
            except np.linalg.LinAlgError:
                return False
            x_B = binv @ b
            x_B[x_B < 0.0] = np.where(x_B[x_B < 0.0] > -1e-7, 0.0, x_B[x_B < 0.0])
            return True

        if not refactor():
            return ITERATION_LIMIT, basis, x_B, 0, "singular starting basis"
        iters = 0
        use_bland = pivot_bland
        stall = 0
        allowed = np.ones(n, dtype=bool)
        for phase in (1, 2):
            cost = c_phase1 if phase == 1 else c_phase2
            if phase == 2:
                allowed[n_real:] = False
            since_refactor = 0
            while True:
                if iters >= config.max_iterations:
                    return (
                        ITERATION_LIMIT,
                        basis,
                        x_B,
                        iters,
                        f"stopped after {iters} simplex iterations in phase {phase}",
                    )
                y = binv.T @ cost[basis]
                z = cost - A_T @ y
                z[basis] = 0.0
                cand = np.nonzero(allowed & (z < -tol))[0]
                if len(cand) == 0:
                    break
                col = int(cand[0]) if use_bland else int(cand[np.argmin(z[cand])])
                d = binv @ A_fortran[:, col]
                ok = d > pivot_tol
                if not ok.any():
                    ok = d > tol
                if not ok.any():
                    if phase == 1:
                        break  # phase-1 objective is bounded below; treat as converged
                    return UNBOUNDED, basis, x_B, iters, f"column {col} has no blocking row"
                with np.errstate(divide="ignore", invalid="ignore"):
                    q = np.where(ok, np.maximum(x_B, 0.0) / d, INF)
                qmin = q.min()
                ties = np.nonzero(q <= qmin + 1e-9 * (1.0 + abs(qmin)))[0]
                if use_bland:
                    row = int(ties[np.argmin(basis[ties])])
                else:
                    row = int(ties[np.argmax(d[ties])])  # stablest pivot
                theta = q[row]
                x_B -= theta * d
                x_B[row] = theta
                piv = d[row]
                binv[row] /= piv
                d[row] = 0.0
                binv -= np.outer(d, binv[row])
                basis[row] = col
                iters += 1
                since_refactor += 1
                if not use_bland:
                    if theta <= tol:
                        stall += 1
                        if stall > config.stall_limit:
                            use_bland = True
                            stall = 0
                    else:
                        stall = 0
                if since_refactor >= refactor_every:
                    if not refactor():
                        return ITERATION_LIMIT, basis, x_B, iters, "singular basis at refactor"
                    since_refactor = 0
            if not refactor():
                return ITERATION_LIMIT, basis, x_B, iters, "singular basis at phase end"
            if phase == 1:
                infeas = float(c_phase1[basis] @ x_B)
                if x_B.min(initial=0.0) < -1e-7:
                    return (
                        ITERATION_LIMIT,
                        basis,
                        x_B,
                        iters,
                        f"basic solution drifted negative ({x_B.min(initial=0.0):.2e})",
                    )
                if infeas > config.feasibility_tol:
                    return INFEASIBLE, basis, x_B, iters, f"phase-1 infeasibility measure {infeas:.3e}"
                # Drive remaining basic artificials out with degenerate pivots;
                # otherwise they may grow back during phase 2 where their cost
                # is zero.  Rows where no real column can enter are redundant,
                # and a redundant row's artificial stays at zero from then on.
                basic = set(int(j) for j in basis)
                for i in range(m):
                    if basis[i] < n_real:
                        continue
                    row_vec = binv[i] @ A[:, :n_real]
                    for j in basic:
                        if j < n_real:
                            row_vec[j] = 0.0
                    j_enter = int(np.argmax(np.abs(row_vec)))
                    if abs(row_vec[j_enter]) <= 1e-9:
                        continue  # redundant row
                    d = binv @ A_fortran[:, j_enter]
                    piv = d[i]
                    binv[i] /= piv
                    d[i] = 0.0
                    binv -= np.outer(d, binv[i])
                    basic.discard(int(basis[i]))
                    basic.add(j_enter)
                    basis[i] = j_enter
                if not refactor():
                    return ITERATION_LIMIT, basis, x_B, iters, "singular basis after drive-out"
        if x_B.min(initial=0.0) < -1e-7:
            return ITERATION_LIMIT, basis, x_B, iters, f"basic solution drifted negative ({x_B.min(initial=0.0):.2e})"
        return OPTIMAL, basis, x_B, iters, "reference simplex optimal"

    status, basis, x_B, iters, message = run(pivot_bland=config.pivot_rule == "bland")
    if status == ITERATION_LIMIT and config.pivot_rule != "bland" and "drifted" in message:
        # one clean retry under the terminating rule before giving up
        status, basis, x_B, iters2, message = run(pivot_bland=True)
        iters += iters2
    if status != OPTIMAL:
        return done(status, iters=iters, message=message)

    z_scaled = np.zeros(n_real)
    for i in range(m):
        if basis[i] < n_real:
            z_scaled[basis[i]] = max(float(x_B[i]), 0.0)
    z_std = z_scaled * c_scale

    x = np.zeros(model.n_cols)
    for j in range(model.n_cols):
        kind, a, extra = sf.col_map[j]
        if kind == "fixed":
            x[j] = extra
        elif kind == "shift":
            x[j] = extra + z_std[a]
        elif kind == "mirror":
            x[j] = extra - z_std[a]
        else:
            x[j] = z_std[a] - z_std[extra]

    dual = _recover_duals(model, sf, basis, artificial_rows, r_scale, c_scale, n_real)
    return done(
        OPTIMAL,
        x=x,
        dual=dual,
        objective=float(model.objective @ x),
        iters=iters,
        message=message,
    )


def _recover_duals(model, sf, basis, artificial_rows, r_scale, c_scale, n0):
    """Row prices for the original rows from the optimal basis: y = B^-T c_B."""
    A_sc = sf.A * r_scale[:, None] * c_scale[None, :]
    m = A_sc.shape[0]
    B = np.zeros((m, m))
    c_B = np.zeros(m)
    c_sc = sf.c * c_scale
    for i, j in enumerate(basis):
        if j < n0:
            B[:, i] = A_sc[:, j]
            c_B[i] = c_sc[j]
        else:
            B[artificial_rows[j - n0], i] = 1.0
    try:
        y_sc = np.linalg.solve(B.T, c_B)
    except np.linalg.LinAlgError:
        return None
    y_std = y_sc * r_scale
    y = np.zeros(model.n_rows)
    for r, entries in enumerate(sf.row_of):
        for std_row, sign in entries:
            y[r] += sign * y_std[std_row]
    return y


def dual_bound(model: LpModel, y: np.ndarray) -> float:
    """Weak-duality lower bound from row prices.

    Positive prices lean on row lower bounds, negative on uppers; leftover
    reduced costs lean on the column bounds.  Any sign-consistent y yields a
    valid bound; a price paired with an infinite bound yields -inf.
    """
    total = 0.0
    for r in range(model.n_rows):
        if y[r] > 1e-12:
            if not math.isfinite(model.row_lower[r]):
                return -INF
            total += y[r] * model.row_lower[r]
        elif y[r] < -1e-12:
            if not math.isfinite(model.row_upper[r]):
                return -INF
            total += y[r] * model.row_upper[r]
    red = model.objective.copy()
    np.subtract.at(red, model.a_cols, model.a_vals * y[model.a_rows])
    for j in range(model.n_cols):
        if red[j] > 1e-9:
            if not math.isfinite(model.col_lower[j]):
                return -INF
            total += red[j] * model.col_lower[j]
        elif red[j] < -1e-9:
            if not math.isfinite(model.col_upper[j]):
                return -INF
            total += red[j] * model.col_upper[j]
    return total


@dataclass
class VerificationReport:
    checks: list[tuple[str, bool, str]]

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def failed_checks(self) -> list[str]:
        return [name for name, ok, _ in self.checks if not ok]

    def __str__(self):
        return "\n".join(
            f"[{'PASS' if ok else 'FAIL'}] {name} {detail}".rstrip()
            for name, ok, detail in self.checks
        )


def verify(model: LpModel, outcome: SolveOutcome, config: SolverConfig | None = None) -> VerificationReport:
    """Re-check an optimal outcome: residuals, bounds, objective, duality gap."""
    config = config or SolverConfig()
    checks: list[tuple[str, bool, str]] = []
    if outcome.status != OPTIMAL or outcome.primal is None:
        checks.append(("status", False, f"outcome status is {outcome.status}"))
        return VerificationReport(checks)
    x = outcome.primal
    if len(x) != model.n_cols:
        checks.append(("primal_length", False, f"{len(x)} != {model.n_cols}"))
        return VerificationReport(checks)
    checks.append(("primal_length", True, ""))

    res = residuals(model, x)
    for g in sorted(res):
        if g == "col_bounds":
            continue
        ok = bool(res[g] <= config.feasibility_tol)
        checks.append((f"residual:{g}", ok, f"max violation {res[g]:.3e}"))

    lo = np.where(np.isfinite(model.col_lower), model.col_lower - x, 0.0)
    hi = np.where(np.isfinite(model.col_upper), x - model.col_upper, 0.0)
    worst = np.maximum(np.maximum(lo, hi), 0.0)
    j = int(np.argmax(worst)) if model.n_cols else 0
    ok = bool(model.n_cols == 0 or worst[j] <= config.feasibility_tol)
    detail = "" if ok else f"column {model.col_name(j)} violates its bound by {worst[j]:.3e}"
    checks.append(("column_bounds", ok, detail))

    recomputed = float(model.objective @ x)
    scale = 1.0 + abs(outcome.objective)
    ok = bool(abs(recomputed - outcome.objective) <= config.optimality_tol * scale)
    checks.append(
        ("objective_recompute", ok, f"recomputed {recomputed:.9g} vs reported {outcome.objective:.9g}")
    )

    if outcome.dual is not None:
        lb = dual_bound(model, outcome.dual)
        gap = outcome.objective - lb
        ok = bool(math.isfinite(lb) and abs(gap) <= config.optimality_tol * scale)
        checks.append(("duality_gap", ok, f"gap {gap:.3e} (certified bound {lb:.9g})"))
    return VerificationReport(checks)


def infeasibility_certificate(model: LpModel, config: SolverConfig | None = None) -> float:
    """Minimum total row-bound slack of the fully elastic relaxation.

    Strictly positive certifies genuine infeasibility of the row system under
    the original column bounds; a near-zero value flags a solver artifact.
    """
    config = config or SolverConfig()
    rows = list(model.a_rows)
    cols = list(model.a_cols)
    vals = list(model.a_vals)
    n = model.n_cols
    n_extra = 0
    for r in range(model.n_rows):
        if math.isfinite(model.row_lower[r]):
            rows.append(r)
            cols.append(n + n_extra)
            vals.append(1.0)
            n_extra += 1
        if math.isfinite(model.row_upper[r]):
            rows.append(r)
            cols.append(n + n_extra)
            vals.append(-1.0)
            n_extra += 1
    elastic = LpModel(
        n_cols=n + n_extra,
        a_rows=np.asarray(rows, dtype=np.int64),
        a_cols=np.asarray(cols, dtype=np.int64),
        a_vals=np.asarray(vals, dtype=np.float64),
        row_lower=model.row_lower.copy(),
        row_upper=model.row_upper.copy(),
        col_lower=np.concatenate([model.col_lower, np.zeros(n_extra)]),
        col_upper=np.concatenate([model.col_upper, np.full(n_extra, INF)]),
        objective=np.concatenate([np.zeros(n), np.ones(n_extra)]),
        row_group=list(model.row_group),
        row_label=list(model.row_label),
        name=model.name + "_slacked",
    )
    out = solve(elastic, SolverConfig(backend=config.backend))
    if out.status != OPTIMAL:
        return INF
    return float(out.objective)


def solve_mps(text: str, config: SolverConfig | None = None) -> SolveOutcome:
    """Solve interchange text directly (standalone cross-checking entry point)."""
    from .lpcore import read_mps

    return solve(read_mps(text), config)


def write_solution_csv(model: LpModel, outcome: SolveOutcome, path) -> None:
    """Emit the primal vector as `column_name,value` rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("column_name,value\n")
        if outcome.primal is not None:
            for j, v in enumerate(outcome.primal):
                fh.write(f"{model.col_name(j)},{v:.12g}\n")
