"""Small dense solvers for the safety pipeline.

Two solvers live here, both written for robustness and bit-determinism on
problems with a handful of variables:

* a two-phase simplex (Bland's rule, lowest-index tie breaking) for the
  max-min capability program, reformulated through its epigraph into
  ``min d.xi  s.t. [0 G; 1 -B] xi <= [l; 0]``;
* a Euclidean-projection QP for the safety filter, solved exactly by
  enumerating active sets (at most two constraints bind in the plane).

Both attach enough certificate data for :func:`check_kkt` to verify
optimality independently of the solve path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .model import Polytope

FEAS_TOL = 1e-8
_SIMPLEX_MAX_ITER = 10_000


# ---------------------------------------------------------------------------
# generic LP: min c.x  s.t. A x <= b, x free
# ---------------------------------------------------------------------------

@dataclass
class LinprogResult:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None = None
    duals: np.ndarray | None = None  # lambda >= 0 with c + A.T @ lambda = 0


def solve_lp(c, A, b) -> LinprogResult:
    """Dense two-phase simplex on ``min c.x s.t. A x <= b`` with free ``x``.

    Free variables are split into positive/negative parts; rows with negative
    right-hand sides get artificial variables for phase one.  Bland's rule
    everywhere, so the pivot sequence (and hence the solution on degenerate
    problems) is deterministic.
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    m, n = A.shape

    if m == 0:
        if np.any(np.abs(c) > FEAS_TOL):
            return LinprogResult("unbounded")
        return LinprogResult("optimal", np.zeros(n), np.zeros(0))

    # Standard form columns: [x+ (n) | x- (n) | slack (m) | artificial (k)].
    flip = np.where(b < 0, -1.0, 1.0)
    M = np.hstack([A * flip[:, None], -A * flip[:, None], np.diag(flip)])
    rhs = b * flip
    art_rows = np.where(flip < 0)[0]
    k = len(art_rows)
    if k:
        art_cols = np.zeros((m, k))
        for idx, r in enumerate(art_rows):
            art_cols[r, idx] = 1.0
        M = np.hstack([M, art_cols])
    ncols = M.shape[1]

    basis = np.empty(m, dtype=int)
    for r in range(m):
        basis[r] = 2 * n + r if flip[r] > 0 else 0  # placeholder for art rows
    for idx, r in enumerate(art_rows):
        basis[r] = 2 * n + m + idx

    T = np.hstack([M, rhs[:, None]])

    def run_phase(cost: np.ndarray, allowed: int) -> str:
        """Pivot until optimal/unbounded; ``allowed`` bounds entering columns."""
        for _ in range(_SIMPLEX_MAX_ITER):
            cb = cost[basis]
            red = cost[:allowed] - cb @ T[:, :allowed]
            entering = -1
            for j in range(allowed):
                if red[j] < -FEAS_TOL and j not in basis:
                    entering = j
                    break  # Bland: lowest index
            if entering < 0:
                return "optimal"
            col = T[:, entering]
            best_ratio, leave = None, -1
            for r in range(m):
                if col[r] > FEAS_TOL:
                    ratio = T[r, -1] / col[r]
                    if (best_ratio is None or ratio < best_ratio - 1e-12
                            or (abs(ratio - best_ratio) <= 1e-12 and basis[r] < basis[leave])):
                        best_ratio, leave = ratio, r
            if leave < 0:
                return "unbounded"
            piv = T[leave, entering]
            T[leave] /= piv
            for r in range(m):
                if r != leave:
                    T[r] -= T[r, entering] * T[leave]
            basis[leave] = entering
        raise RuntimeError("simplex iteration limit exceeded")

    if k:
        phase1_cost = np.zeros(ncols)
        phase1_cost[2 * n + m:] = 1.0
        # Price out the artificial basis.
        status = run_phase(phase1_cost, ncols)
        if status != "optimal":
            raise RuntimeError("phase-1 simplex cannot be unbounded")
        if phase1_cost[basis] @ T[:, -1] > 1e-7:
            return LinprogResult("infeasible")
        # Drive any artificial still in the basis out (degenerate rows).
        for r in range(m):
            if basis[r] >= 2 * n + m:
                for j in range(2 * n + m):
                    if abs(T[r, j]) > FEAS_TOL:
                        piv = T[r, j]
                        T[r] /= piv
                        for rr in range(m):
                            if rr != r:
                                T[rr] -= T[rr, j] * T[r]
                        basis[r] = j
                        break

    cost = np.zeros(ncols)
    cost[:n] = c
    cost[n:2 * n] = -c
    status = run_phase(cost, 2 * n + m)
    if status == "unbounded":
        return LinprogResult("unbounded")

    z = np.zeros(ncols)
    z[basis] = T[:, -1]
    x = z[:n] - z[n:2 * n]

    # Dual recovery on the original equality system (flip folded back in).
    cols = np.hstack([A, -A, np.diag(np.ones(m))])
    basis_orig = [j for j in basis if j < 2 * n + m]
    y = np.zeros(m)
    if len(basis_orig) == m:
        B_mat = cols[:, basis_orig] * flip[:, None]
        try:
            y = np.linalg.solve(B_mat.T, cost[basis_orig])
        except np.linalg.LinAlgError:
            y = np.linalg.lstsq(B_mat.T, cost[basis_orig], rcond=None)[0]
    lam = np.maximum(-flip * y, 0.0)
    return LinprogResult("optimal", x, lam)


# ---------------------------------------------------------------------------
# max-min capability LP
# ---------------------------------------------------------------------------

@dataclass
class LpResult:
    gamma: float
    u_star: np.ndarray
    status: str  # optimal | infeasible | unbounded
    duals: np.ndarray | None = None
    B: np.ndarray | None = None
    constraints: Polytope | None = None


def maxmin_capability(B, constraints: Polytope) -> LpResult:
    """Best worst-case capability: max over u in the polytope of min_k [B u]_k.

    Solved through the epigraph LP ``min [-1,0...] . [gamma, u]`` subject to
    ``[0 G; 1 -B][gamma, u] <= [l; 0]``.  With no capability rows the agent
    faces no obstacle: gamma is reported as +inf with u* = 0.
    """
    B = np.asarray(B, dtype=float).reshape(-1, 2)
    K = B.shape[0]
    if K == 0:
        return LpResult(np.inf, np.zeros(2), "optimal", np.zeros(0), B, constraints)
    G, l = constraints.G, constraints.l
    mrows = G.shape[0]
    A = np.zeros((mrows + K, 3))
    b = np.zeros(mrows + K)
    A[:mrows, 1:] = G
    b[:mrows] = l
    A[mrows:, 0] = 1.0
    A[mrows:, 1:] = -B
    d = np.array([-1.0, 0.0, 0.0])
    res = solve_lp(d, A, b)
    if res.status != "optimal":
        return LpResult(np.nan, np.zeros(2), res.status, None, B, constraints)
    gamma, u = float(res.x[0]), res.x[1:]
    return LpResult(gamma, u, "optimal", res.duals, B, constraints)


# ---------------------------------------------------------------------------
# safety-filter QP
# ---------------------------------------------------------------------------

@dataclass
class QpResult:
    u_s: np.ndarray
    status: str  # optimal | infeasible
    active_set: list[int] = field(default_factory=list)
    duals: np.ndarray | None = None
    center: np.ndarray | None = None
    normals: np.ndarray | None = None
    offsets: np.ndarray | None = None


def _stack_constraints(halfspaces, box: Polytope):
    """All constraints as rows n.u <= m: halfspaces c.u >= d become -c.u <= -d."""
    normals, offsets = [], []
    for cvec, dval in halfspaces:
        normals.append(-np.asarray(cvec, dtype=float))
        offsets.append(-float(dval))
    for r in range(box.rows):
        normals.append(box.G[r])
        offsets.append(box.l[r])
    if normals:
        return np.vstack(normals), np.array(offsets)
    return np.zeros((0, 2)), np.zeros(0)


def qp_safety_filter(objective_center, halfspaces, box: Polytope) -> QpResult:
    """Project ``objective_center`` onto the feasible set.

    min (1/2)||u - center||^2 over the halfspaces (c.u >= d) intersected with
    the box polytope.  Exact active-set enumeration: in two dimensions the
    projection has at most two binding constraints, so every singleton and
    non-degenerate pair is tried and validated against the KKT conditions.
    Candidates are ordered by (objective, active-set index) for determinism.
    """
    z = np.asarray(objective_center, dtype=float)
    N, m = _stack_constraints(halfspaces, box)
    ncon = N.shape[0]

    def feasible(u):
        return ncon == 0 or np.all(N @ u - m <= FEAS_TOL)

    candidates: list[tuple[float, tuple[int, ...], np.ndarray, np.ndarray]] = []
    if feasible(z):
        candidates.append((0.0, (), z, np.zeros(0)))
    else:
        for kk in range(ncon):
            nk, nn = N[kk], float(N[kk] @ N[kk])
            if nn < 1e-16:
                continue
            lam = (nk @ z - m[kk]) / nn
            if lam < -FEAS_TOL:
                continue
            u = z - lam * nk
            if feasible(u):
                obj = 0.5 * float((u - z) @ (u - z))
                candidates.append((obj, (kk,), u, np.array([max(lam, 0.0)])))
        for k1, k2 in itertools.combinations(range(ncon), 2):
            Nk = N[[k1, k2]]
            scale = np.linalg.norm(Nk[0]) * np.linalg.norm(Nk[1])
            if scale < 1e-16 or abs(np.linalg.det(Nk)) < 1e-10 * scale:
                continue  # parallel or degenerate pair at this scale
            try:
                u = np.linalg.solve(Nk, m[[k1, k2]])
                lam = np.linalg.solve(Nk @ Nk.T, Nk @ (z - u))
            except np.linalg.LinAlgError:
                continue
            if np.any(lam < -FEAS_TOL):
                continue
            if feasible(u):
                obj = 0.5 * float((u - z) @ (u - z))
                candidates.append((obj, (k1, k2), u, np.maximum(lam, 0.0)))

    if not candidates:
        return QpResult(np.zeros(2), "infeasible", [], None, z, N, m)
    candidates.sort(key=lambda cand: (cand[0], cand[1]))
    obj, active, u, lam = candidates[0]
    return QpResult(u, "optimal", list(active), lam, z, N, m)


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass
class KktReport:
    applicable: bool
    primal_residual: float = np.nan
    dual_residual: float = np.nan
    stationarity_residual: float = np.nan

    @property
    def max_residual(self) -> float:
        return max(self.primal_residual, self.dual_residual, self.stationarity_residual)


def check_kkt(result) -> KktReport:
    """Residual report for an optimal LP or QP result.

    LP: primal feasibility of the epigraph system, dual feasibility, and
    stationarity ``d + A.T lambda = 0`` plus the max-min certificate
    ``gamma = min_k [B u*]_k``.  QP: constraint feasibility, multiplier sign,
    and ``u - center + N_active.T lambda = 0``.
    """
    if isinstance(result, LpResult):
        if result.status != "optimal":
            return KktReport(applicable=False)
        if result.B is not None and result.B.shape[0] == 0:
            return KktReport(True, 0.0, 0.0, 0.0)
        B, poly = result.B, result.constraints
        xi = np.concatenate([[result.gamma], result.u_star])
        mrows = poly.G.shape[0]
        A = np.zeros((mrows + B.shape[0], 3))
        b = np.zeros(mrows + B.shape[0])
        A[:mrows, 1:] = poly.G
        b[:mrows] = poly.l
        A[mrows:, 0] = 1.0
        A[mrows:, 1:] = -B
        primal = float(np.max(A @ xi - b, initial=0.0))
        gamma_gap = abs(result.gamma - float(np.min(B @ result.u_star)))
        if result.duals is None:
            return KktReport(True, max(primal, gamma_gap), np.inf, np.inf)
        dual = float(np.max(-result.duals, initial=0.0))
        stat = float(np.max(np.abs(np.array([-1.0, 0.0, 0.0]) + A.T @ result.duals)))
        comp = float(np.max(np.abs(result.duals * (A @ xi - b)), initial=0.0))
        return KktReport(True, max(primal, gamma_gap), dual, max(stat, comp))

    if isinstance(result, QpResult):
        if result.status != "optimal":
            return KktReport(applicable=False)
        N, m, z, u = result.normals, result.offsets, result.center, result.u_s
        primal = float(np.max(N @ u - m, initial=0.0)) if N.shape[0] else 0.0
        lam_full = np.zeros(N.shape[0])
        for lam, idx in zip(result.duals, result.active_set):
            lam_full[idx] = lam
        dual = float(np.max(-lam_full, initial=0.0))
        stat = float(np.max(np.abs(u - z + N.T @ lam_full))) if N.shape[0] else float(
            np.max(np.abs(u - z))
        )
        comp = float(np.max(np.abs(lam_full * (N @ u - m)), initial=0.0)) if N.shape[0] else 0.0
        return KktReport(True, primal, dual, max(stat, comp))

    raise TypeError(f"unsupported result type {type(result)!r}")
