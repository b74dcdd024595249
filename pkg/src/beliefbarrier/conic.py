"""Semidefinite feasibility programs and a reference interior-point solver.

A ConicProgram is a linear matrix-inequality problem over a scalar decision
vector x:

    blocks:      F0 + sum_i x_i Fi  >= 0   (each optionally strict, > 0)
    equalities:  A x = c
    inequalities G x >= h                  (rows optionally strict)
    objective:   maximize obj . x          (feasibility when absent)

Strict feasibility is decided through a margin reformulation: maximize t
subject to every shifted constraint keeping a slack of at least t. The
shifted problem is always strictly feasible in (x, t), so the optimal t
cleanly separates the outcomes: t* >= eps_strict certifies strict
feasibility, t* < -tol certifies that no feasible point exists at all
(even the best joint slack is negative), and the band in between is
reported as marginal.

The solver itself is a dense primal-dual path-following method (Mehrotra
predictor-corrector with the HKM direction), written for the desk-scale
blocks produced by the verifier (up to a few hundred rows). Equalities are
eliminated onto the constraint null space before the iteration starts. An
optional cvxopt backend behind the same interface is available for
cross-checking.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

DEFAULT_TOL = 1e-7
DEFAULT_EPS_STRICT = 1e-6
DEFAULT_T_MAX = 1.0
DEFAULT_BOX_BOUND = 1e5
DEFAULT_MAX_ITER = 200

SYMMETRY_TOL = 1e-12


class SolveStatus(str, enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    MARGINAL = "marginal"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class LmiBlock:
    """Matrix pencil F0 + sum_i x_i coeffs[i], required PSD (PD if strict)."""

    dim: int
    F0: np.ndarray
    coeffs: dict[int, np.ndarray]
    strict: bool = False
    name: str = ""

    def validate(self, n_vars: int) -> None:
        if self.F0.shape != (self.dim, self.dim):
            raise ValueError(f"block {self.name!r}: F0 has shape {self.F0.shape}")
        if np.max(np.abs(self.F0 - self.F0.T), initial=0.0) > SYMMETRY_TOL * max(
            1.0, np.max(np.abs(self.F0), initial=0.0)
        ):
            raise ValueError(f"block {self.name!r}: F0 is not symmetric")
        for i, F in self.coeffs.items():
            if not 0 <= i < n_vars:
                raise ValueError(f"block {self.name!r}: variable index {i} out of range")
            if F.shape != (self.dim, self.dim):
                raise ValueError(f"block {self.name!r}: coefficient {i} has shape {F.shape}")
            if np.max(np.abs(F - F.T), initial=0.0) > SYMMETRY_TOL * max(
                1.0, np.max(np.abs(F), initial=0.0)
            ):
                raise ValueError(f"block {self.name!r}: coefficient {i} is not symmetric")

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        S = self.F0.copy()
        for i, F in self.coeffs.items():
            S += x[i] * F
        return S


@dataclass
class ConicProgram:
    n_vars: int
    blocks: list[LmiBlock] = field(default_factory=list)
    eq_A: Optional[np.ndarray] = None
    eq_c: Optional[np.ndarray] = None
    ineq_G: Optional[np.ndarray] = None
    ineq_h: Optional[np.ndarray] = None
    ineq_strict: Optional[np.ndarray] = None
    objective: Optional[np.ndarray] = None
    var_names: Optional[list[str]] = None

    def validate(self) -> None:
        for blk in self.blocks:
            blk.validate(self.n_vars)
        if (self.eq_A is None) != (self.eq_c is None):
            raise ValueError("eq_A and eq_c must be given together")
        if self.eq_A is not None and self.eq_A.shape != (len(self.eq_c), self.n_vars):
            raise ValueError("equality system has inconsistent shape")
        if (self.ineq_G is None) != (self.ineq_h is None):
            raise ValueError("ineq_G and ineq_h must be given together")
        if self.ineq_G is not None:
            if self.ineq_G.shape != (len(self.ineq_h), self.n_vars):
                raise ValueError("inequality system has inconsistent shape")
            if self.ineq_strict is not None and len(self.ineq_strict) != len(self.ineq_h):
                raise ValueError("ineq_strict length mismatch")
        if self.objective is not None and len(self.objective) != self.n_vars:
            raise ValueError("objective length mismatch")

    def has_strict(self) -> bool:
        if any(b.strict for b in self.blocks):
            return True
        return self.ineq_strict is not None and bool(np.any(self.ineq_strict))

    def to_json_obj(self) -> dict:
        def dense(blk: LmiBlock) -> dict:
            mats = {str(i): F.tolist() for i, F in sorted(blk.coeffs.items())}
            return {
                "name": blk.name,
                "dim": blk.dim,
                "strict": blk.strict,
                "F0": blk.F0.tolist(),
                "coeffs": mats,
            }

        return {
            "n_vars": self.n_vars,
            "var_names": self.var_names,
            "objective": None if self.objective is None else self.objective.tolist(),
            "blocks": [dense(b) for b in self.blocks],
            "eq_A": None if self.eq_A is None else self.eq_A.tolist(),
            "eq_c": None if self.eq_c is None else self.eq_c.tolist(),
            "ineq_G": None if self.ineq_G is None else self.ineq_G.tolist(),
            "ineq_h": None if self.ineq_h is None else self.ineq_h.tolist(),
            "ineq_strict": None
            if self.ineq_strict is None
            else [bool(v) for v in self.ineq_strict],
        }

    def dump_json(self) -> str:
        return json.dumps(self.to_json_obj())


@dataclass
class ConicSolution:
    status: SolveStatus
    x: Optional[np.ndarray]
    margin: float
    objective_value: Optional[float]
    residuals: dict
    iterations: int
    message: str = ""

    def to_json_obj(self) -> dict:
        return {
            "status": self.status.value,
            "x": None if self.x is None else self.x.tolist(),
            "margin": self.margin,
            "objective_value": self.objective_value,
            "residuals": {
                k: (v.tolist() if isinstance(v, np.ndarray) else v)
                for k, v in self.residuals.items()
            },
            "iterations": self.iterations,
            "message": self.message,
        }


# --- reduced standard form ----------------------------------------------------


@dataclass
class _DenseBlock:
    C: np.ndarray                # constant term, scaled
    idx: np.ndarray              # active reduced-variable indices
    A: np.ndarray                # (len(idx), n, n) coefficient stack, scaled
    scale: float                 # original = scale * scaled


@dataclass
class _Reduced:
    n: int                       # reduced variable count
    blocks: list[_DenseBlock]
    G: np.ndarray                # (q, n) LP rows, slack = h0 + G u >= 0
    h0: np.ndarray
    b: np.ndarray                # maximize b . u
    t_index: Optional[int] = None  # margin variable, when present


class _EqualityInconsistent(Exception):
    def __init__(self, residual: float):
        self.residual = residual



def _eliminate_equalities(program: ConicProgram, tol: float):
    """Particular solution plus orthonormal null basis for A x = c."""
    m = program.n_vars
    if program.eq_A is None or len(program.eq_c) == 0:
        return np.zeros(m), np.eye(m)
    A = np.asarray(program.eq_A, dtype=float)
    c = np.asarray(program.eq_c, dtype=float)
    u, s, vt = np.linalg.svd(A, full_matrices=True)
    cutoff = max(A.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    cutoff = max(cutoff, 1e-12)
    rank = int(np.sum(s > cutoff))
    # Minimum-norm particular solution.
    x0 = vt[:rank].T @ ((u[:, :rank].T @ c) / s[:rank]) if rank else np.zeros(m)
    residual = np.linalg.norm(A @ x0 - c, ord=np.inf)
    if residual > tol * (1.0 + np.linalg.norm(c, ord=np.inf)):
        raise _EqualityInconsistent(residual)
    N = vt[rank:].T  # (m, m - rank), orthonormal columns
    return x0, N


def _reduce(
    program: ConicProgram,
    x0: np.ndarray,
    N: np.ndarray,
    box_bound: float,
    shift: str,
    t_max: float,
    objective: Optional[np.ndarray],
) -> _Reduced:
    """Project onto the equality null space and append the margin variable.

    shift is "all", "strict", or "none"; shifted constraints get slack t,
    where t is the last reduced variable (present unless shift == "none"
    and objective is not None).
    """
    m = program.n_vars
    f = N.shape[1]
    with_t = shift != "none"
    n = f + (1 if with_t else 0)
    t_idx = f

    blocks: list[_DenseBlock] = []
    drop_tol = 1e-15
    for blk in program.blocks:
        C = blk.evaluate(x0)
        cols = sorted(blk.coeffs)
        mats = []
        idx = []
        if cols:
            stack = np.stack([blk.coeffs[i] for i in cols])       # (k, d, d)
            W = np.einsum("kab,kj->jab", stack, N[cols, :])        # (f, d, d)
            norms = np.max(np.abs(W), axis=(1, 2))
            for j in range(f):
                if norms[j] > drop_tol:
                    idx.append(j)
                    mats.append(W[j])
        shifted = shift == "all" or (shift == "strict" and blk.strict)
        if shifted and with_t:
            idx.append(t_idx)
            mats.append(-np.eye(blk.dim))
        A = np.stack(mats) if mats else np.zeros((0, blk.dim, blk.dim))
        scale = max(
            1.0,
            np.max(np.abs(C), initial=0.0),
            np.max(np.abs(A), initial=0.0),
        )
        blocks.append(
            _DenseBlock(C=C / scale, idx=np.array(idx, dtype=int), A=A / scale, scale=scale)
        )

    g_rows = []
    h_rows = []
    if program.ineq_G is not None and len(program.ineq_h):
        G0 = np.asarray(program.ineq_G, dtype=float)
        h = np.asarray(program.ineq_h, dtype=float)
        strict = (
            np.asarray(program.ineq_strict, dtype=bool)
            if program.ineq_strict is not None
            else np.zeros(len(h), dtype=bool)
        )
        Gn = G0 @ N
        off = G0 @ x0 - h
        for r in range(len(h)):
            row = np.zeros(n)
            row[:f] = Gn[r]
            if with_t and (shift == "all" or (shift == "strict" and strict[r])):
                row[t_idx] = -1.0
            g_rows.append(row)
            h_rows.append(off[r])

    # Box bounds on the original variables keep rays out of the problem and
    # make the Schur complement structurally nonsingular.
    if box_bound is not None and box_bound > 0:
        for i in range(m):
            row = np.zeros(n)
            row[:f] = -N[i, :]
            g_rows.append(row)
            h_rows.append(box_bound - x0[i])
            row2 = np.zeros(n)
            row2[:f] = N[i, :]
            g_rows.append(row2)
            h_rows.append(box_bound + x0[i])

    if with_t:
        row = np.zeros(n)
        row[t_idx] = -1.0
        g_rows.append(row)
        h_rows.append(t_max)

    b = np.zeros(n)
    if objective is not None:
        b[:f] = N.T @ objective
    if with_t:
        b[t_idx] = 1.0 if objective is None else 0.0

    G = np.array(g_rows) if g_rows else np.zeros((0, n))
    h0 = np.array(h_rows) if h_rows else np.zeros(0)
    if len(h0):
        # Unit max-norm per row keeps the complementarity products on one
        # scale; the margin column scales with its row, so t keeps its units.
        row_scale = np.maximum(
            np.max(np.abs(G), axis=1, initial=0.0), np.abs(h0)
        )
        row_scale = np.maximum(row_scale, 1e-12)
        G = G / row_scale[:, None]
        h0 = h0 / row_scale
    return _Reduced(n=n, blocks=blocks, G=G, h0=h0, b=b,
                    t_index=t_idx if with_t else None)


# --- interior-point core -------------------------------------------------------


@dataclass
class _IpmResult:
    converged: bool
    u: np.ndarray
    objective: float
    iterations: int
    message: str


def _chol_repair(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cholesky with an eigenvalue-floor repair for boundary roundoff."""
    try:
        return scipy.linalg.cholesky(A, lower=True), A
    except np.linalg.LinAlgError:
        lam = np.linalg.eigvalsh(A)[0]
        shift = max(-lam, 0.0) + 1e-13 * max(1.0, float(np.max(np.abs(A))))
        A = A + shift * np.eye(A.shape[0])
        return scipy.linalg.cholesky(A, lower=True), A


def _max_psd_step(S: np.ndarray, dS: np.ndarray, chol: np.ndarray) -> float:
    """sup alpha with S + alpha dS >= 0, given chol(S) lower-triangular."""
    W = scipy.linalg.solve_triangular(chol, dS, lower=True)
    W = scipy.linalg.solve_triangular(chol, W.T, lower=True)
    lam = np.linalg.eigvalsh(0.5 * (W + W.T))[0]
    if lam >= -1e-14:
        return np.inf
    return -1.0 / lam


@dataclass
class _Group:
    """Same-dimension blocks stacked for batched linear algebra."""

    dim: int
    C: np.ndarray          # (B, d, d)
    A: np.ndarray          # (B, K, d, d), zero-padded
    idx: np.ndarray        # (B, K) variable indices, padding points at 0
    scale: np.ndarray      # (B,) original block scales

    @property
    def count(self) -> int:
        return self.C.shape[0]


def _group_blocks(blocks: Sequence[_DenseBlock]) -> list[_Group]:
    by_dim: dict[int, list[_DenseBlock]] = {}
    for blk in blocks:
        if blk.C.size:
            by_dim.setdefault(blk.C.shape[0], []).append(blk)
    groups = []
    for dim, items in sorted(by_dim.items()):
        B = len(items)
        K = max((len(blk.idx) for blk in items), default=0)
        K = max(K, 1)
        C = np.zeros((B, dim, dim))
        A = np.zeros((B, K, dim, dim))
        idx = np.zeros((B, K), dtype=int)
        scale = np.ones(B)
        for bi, blk in enumerate(items):
            C[bi] = blk.C
            scale[bi] = blk.scale
            k = len(blk.idx)
            if k:
                A[bi, :k] = blk.A
                idx[bi, :k] = blk.idx
        groups.append(_Group(dim=dim, C=C, A=A, idx=idx, scale=scale))
    return groups


def _bsym(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _bchol(S: np.ndarray) -> np.ndarray:
    """Batched Cholesky with an eigenvalue-floor repair on failure."""
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        out = np.empty_like(S)
        for i in range(S.shape[0]):
            L, _ = _chol_repair(S[i])
            out[i] = L
        return out


def _pencil_value(g: _Group, u: np.ndarray) -> np.ndarray:
    return g.C + np.einsum("bk,bkij->bij", u[g.idx], g.A)


def _ipm(red: _Reduced, tol: float, max_iter: int, u0: Optional[np.ndarray] = None,
         trace: bool = False, early_margin: Optional[float] = None) -> _IpmResult:
    n = red.n
    groups = _group_blocks(red.blocks)
    G, h0, b = red.G, red.h0, red.b
    q = len(h0)
    total_dim = sum(g.count * g.dim for g in groups) + q

    u = np.zeros(n) if u0 is None else u0.copy()

    # Margin problems are feasibility oracles: once the achieved slack of
    # every margin-shifted constraint clears the target there is no need to
    # polish the optimum.
    t_idx = red.t_index
    shifted_rows = np.nonzero(G[:, t_idx] != 0.0)[0] if (q and t_idx is not None) else None

    def achieved_margin(uv: np.ndarray) -> float:
        if t_idx is None:
            return -math.inf
        t_val = float(uv[t_idx])
        worst = math.inf
        for g in groups:
            has_t = np.any(g.idx == t_idx, axis=1)
            if not np.any(has_t):
                continue
            vals = _pencil_value(g, uv)[has_t]
            lam = np.linalg.eigvalsh(_bsym(vals))[:, 0] * g.scale[has_t]
            worst = min(worst, float(np.min(lam)))
        if shifted_rows is not None and len(shifted_rows):
            slack = h0[shifted_rows] + G[shifted_rows] @ uv
            # row scaling divided the t coefficient too; normalize back
            coef = -G[shifted_rows, t_idx]
            worst = min(worst, float(np.min(slack / coef)))
        if not math.isfinite(worst):
            return -math.inf
        return t_val + worst

    # Slack stacks: start from the pencil value when safely positive
    # definite, otherwise shift onto the cone (infeasible start).
    S: list[np.ndarray] = []
    X: list[np.ndarray] = []
    eye = {g.dim: np.eye(g.dim) for g in groups}
    for g in groups:
        val = _pencil_value(g, u)
        lam = np.linalg.eigvalsh(_bsym(val))[:, 0]
        shift = np.where(lam < 1e-3, 1e-3 - lam + 1.0, 0.0)
        S.append(_bsym(val) + shift[:, None, None] * eye[g.dim])
        X.append(np.broadcast_to(eye[g.dim], val.shape).copy())
    if q:
        s = h0 + G @ u
        s = np.where(s < 1e-3, 1.0, s)
        x = np.ones(q)
    else:
        s = np.zeros(0)
        x = np.zeros(0)

    message = "iteration cap reached"
    best_u = u.copy()
    obj_history: list[float] = []
    for it in range(1, max_iter + 1):
        Rd = [ _pencil_value(g, u) - Sg for g, Sg in zip(groups, S) ]
        rd = (h0 + G @ u - s) if q else np.zeros(0)

        p = b.copy()
        for g, Xg in zip(groups, X):
            contrib = np.einsum("bkij,bij->bk", g.A, Xg)
            np.add.at(p, g.idx.ravel(), contrib.ravel())
        if q:
            p += G.T @ x

        gap = sum(float(np.einsum("bij,bij->", Xg, Sg)) for Xg, Sg in zip(X, S))
        if q:
            gap += float(x @ s)
        mu = gap / max(total_dim, 1)

        obj = float(b @ u)
        x_scale = max(
            [float(np.max(np.abs(Xg))) if Xg.size else 0.0 for Xg in X]
            + [float(np.max(x)) if q else 0.0]
        )
        pinf = np.linalg.norm(p, ord=np.inf) / (
            1.0 + np.linalg.norm(b, ord=np.inf) + x_scale
        )
        dinf = 0.0
        for R in Rd:
            if R.size:
                dinf = max(dinf, float(np.max(np.abs(R))))
        if q:
            dinf = max(dinf, float(np.linalg.norm(rd, ord=np.inf)))
        relgap = gap / (1.0 + abs(obj))

        if trace:
            print(
                f"  it {it:3d} obj={obj:+.6e} pinf={pinf:.2e} dinf={dinf:.2e} "
                f"gap={relgap:.2e} mu={mu:.2e}"
            )
        if pinf <= tol and dinf <= tol and relgap <= tol:
            return _IpmResult(True, u, obj, it - 1, "converged")
        # Degenerate boundary optima: the dual side is unbounded, so its
        # residual floors above tol while the returned point has long
        # converged. Accept once the objective is stationary with tight gap
        # and dual-form residuals.
        obj_history.append(obj)
        if (
            len(obj_history) >= 6
            and dinf <= tol
            and relgap <= tol
            and pinf <= 1e-4
            and abs(obj_history[-6] - obj) <= tol * (1.0 + abs(obj))
        ):
            return _IpmResult(True, u, obj, it - 1, "converged at a degenerate optimum")
        if not np.isfinite(pinf) or not np.isfinite(gap):
            return _IpmResult(False, best_u, obj, it - 1, "diverged")
        best_u = u.copy()

        if early_margin is not None and dinf <= 1e-7:
            ach = achieved_margin(u)
            if ach >= early_margin:
                u_out = u.copy()
                u_out[t_idx] = ach
                return _IpmResult(True, u_out, ach, it - 1,
                                  "margin target reached")

        # Nesterov-Todd scaling point per block: W S W = X.
        chols = []
        Linvs = []
        Sinv = []
        Wnt = []
        Wnt_inv = []
        for g, Sg, Xg in zip(groups, S, X):
            L = _bchol(Sg)
            chols.append(L)
            Linv = np.linalg.inv(L)
            Linvs.append(Linv)
            LinvT = np.swapaxes(Linv, -1, -2)
            Sinv.append(_bsym(LinvT @ Linv))
            T = _bsym(np.swapaxes(L, -1, -2) @ Xg @ L)
            lam, U = np.linalg.eigh(T)
            lam = np.maximum(lam, 1e-14 * np.maximum(1.0, lam[:, -1:]))
            UT = np.swapaxes(U, -1, -2)
            Thalf = (U * np.sqrt(lam)[:, None, :]) @ UT
            Tneghalf = (U / np.sqrt(lam)[:, None, :]) @ UT
            Wnt.append(_bsym(LinvT @ Thalf @ Linv))
            Wnt_inv.append(_bsym(L @ Tneghalf @ np.swapaxes(L, -1, -2)))

        # Schur complement in the NT metric: M_ij = tr(A_i W A_j W), a Gram
        # matrix, hence symmetric positive semidefinite. The contractions are
        # shaped as batched matmuls so BLAS carries the load.
        M = np.zeros((n, n))
        WAW = []
        for g, W in zip(groups, Wnt):
            B, K, dd = g.A.shape[0], g.A.shape[1], g.dim
            T = np.matmul(np.matmul(W[:, None], g.A), W[:, None])
            WAW.append(T)
            Mg = np.matmul(
                g.A.reshape(B, K, dd * dd), T.reshape(B, K, dd * dd).swapaxes(1, 2)
            )
            Mg = 0.5 * (Mg + np.swapaxes(Mg, -1, -2))
            for bi in range(g.count):
                ii = g.idx[bi]
                if np.unique(ii).size == ii.size:
                    M[np.ix_(ii, ii)] += Mg[bi]
                else:
                    # padding aliases variable 0; add.at accumulates duplicates
                    np.add.at(M, (ii[:, None], ii[None, :]), Mg[bi])
        if q:
            d = x / s
            M += (G.T * d) @ G

        def solve_M(rhs: np.ndarray) -> Optional[np.ndarray]:
            ridge = 0.0
            base = max(np.trace(M) / max(n, 1), 1.0)
            for attempt in range(6):
                try:
                    L = scipy.linalg.cholesky(M + ridge * np.eye(n), lower=True)
                    return scipy.linalg.cho_solve((L, True), rhs)
                except np.linalg.LinAlgError:
                    ridge = max(base * 10.0 ** (attempt - 12), 1e-14)
            return None

        def directions(sigma_mu: float, Klist, e_lp):
            # Complementarity linearization: dX + W dS W = sigma*mu*Sinv - X - K.
            rhs = b.copy()
            for g, Si, Rk, Kk, W in zip(groups, Sinv, Rd, Klist, Wnt):
                term = sigma_mu * Si - _bsym(W @ Rk @ W)
                if Kk is not None:
                    term = term - Kk
                contrib = np.einsum("bkij,bij->bk", g.A, term)
                np.add.at(rhs, g.idx.ravel(), contrib.ravel())
            if q:
                vec = sigma_mu / s - (x * rd) / s
                if e_lp is not None:
                    vec = vec - e_lp / s
                rhs += G.T @ vec
            du = solve_M(rhs)
            if du is None:
                return None
            dS = []
            dX = []
            for g, Xg, Si, Rk, Kk, W in zip(groups, X, Sinv, Rd, Klist, Wnt):
                dSg = Rk + np.einsum("bk,bkij->bij", du[g.idx], g.A)
                core = sigma_mu * Si - Xg - _bsym(W @ dSg @ W)
                if Kk is not None:
                    core = core - Kk
                dS.append(dSg)
                dX.append(core)
            if q:
                ds = G @ du + rd
                dx = sigma_mu / s - x - (x * ds) / s
                if e_lp is not None:
                    dx = dx - e_lp / s
            else:
                ds = np.zeros(0)
                dx = np.zeros(0)
            return du, dS, dX, ds, dx

        def max_step_psd(Zs, dZs, Linv_list=None) -> float:
            alpha = 1.0
            for gi, (Zg, dZg) in enumerate(zip(Zs, dZs)):
                if not Zg.size:
                    continue
                if Linv_list is not None:
                    Li = Linv_list[gi]
                else:
                    Li = np.linalg.inv(_bchol(Zg))
                Y = _bsym(Li @ dZg @ np.swapaxes(Li, -1, -2))
                lam = np.linalg.eigvalsh(Y)[:, 0]
                neg = lam < -1e-14
                if np.any(neg):
                    alpha = min(alpha, float(np.min(-1.0 / lam[neg])))
            return alpha

        def step_lengths(dS, dX, ds, dx):
            a_d = max_step_psd(S, dS, Linvs)
            a_p = max_step_psd(X, dX)
            if q:
                neg = ds < 0
                if np.any(neg):
                    a_d = min(a_d, float(np.min(-s[neg] / ds[neg])))
                neg = dx < 0
                if np.any(neg):
                    a_p = min(a_p, float(np.min(-x[neg] / dx[neg])))
            return a_p, a_d

        none_K = [None] * len(groups)
        aff = directions(0.0, none_K, None)
        if aff is None:
            return _IpmResult(False, best_u, obj, it - 1, "singular normal system")
        du_a, dS_a, dX_a, ds_a, dx_a = aff
        alpha_p, alpha_d = step_lengths(dS_a, dX_a, ds_a, dx_a)

        gap_aff = 0.0
        for Xg, dXg, Sg, dSg in zip(X, dX_a, S, dS_a):
            gap_aff += float(
                np.einsum("bij,bij->", Xg + alpha_p * dXg, Sg + alpha_d * dSg)
            )
        if q:
            gap_aff += float((x + alpha_p * dx_a) @ (s + alpha_d * ds_a))
        mu_aff = gap_aff / max(total_dim, 1)
        sigma = min(1.0, max(0.0, (mu_aff / mu)) ** 3) if mu > 0 else 0.1

        # Second-order correction in the scaled space; dropped if it
        # shortens the step badly.
        Klist = [
            _bsym(dXg @ Wi @ dSg @ W)
            for dXg, dSg, W, Wi in zip(dX_a, dS_a, Wnt, Wnt_inv)
        ]
        e_lp = dx_a * ds_a if q else None

        corr = directions(sigma * mu, Klist, e_lp)
        if corr is None:
            return _IpmResult(False, best_u, obj, it - 1, "singular normal system")
        du, dS, dX, ds, dx = corr
        a_p, a_d = step_lengths(dS, dX, ds, dx)
        if min(a_p, a_d) < 0.05:
            plain = directions(sigma * mu, none_K, None)
            if plain is not None:
                du2, dS2, dX2, ds2, dx2 = plain
                a_p2, a_d2 = step_lengths(dS2, dX2, ds2, dx2)
                if min(a_p2, a_d2) > min(a_p, a_d):
                    du, dS, dX, ds, dx = du2, dS2, dX2, ds2, dx2
                    a_p, a_d = a_p2, a_d2

        tau = 0.98
        alpha_d = min(tau * a_d, 1.0)
        alpha_p = min(tau * a_p, 1.0)
        if alpha_d < 1e-10 and alpha_p < 1e-10:
            return _IpmResult(False, best_u, obj, it, "step length collapsed")

        u += alpha_d * du
        for gi in range(len(groups)):
            S[gi] = _bsym(S[gi] + alpha_d * dS[gi])
            X[gi] = _bsym(X[gi] + alpha_p * dX[gi])
        if q:
            s = s + alpha_d * ds
            x = x + alpha_p * dx

    return _IpmResult(False, best_u, float(b @ best_u), max_iter, message)


def _sym(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


# --- public solve --------------------------------------------------------------


def _evaluate_point(program: ConicProgram, x: np.ndarray) -> dict:
    min_eigs = []
    for blk in program.blocks:
        S = blk.evaluate(x)
        min_eigs.append(float(np.linalg.eigvalsh(S)[0]) if S.size else 0.0)
    eq_res = 0.0
    if program.eq_A is not None and len(program.eq_c):
        eq_res = float(np.linalg.norm(program.eq_A @ x - program.eq_c, ord=np.inf))
    slack_min = math.inf
    if program.ineq_G is not None and len(program.ineq_h):
        slack_min = float(np.min(program.ineq_G @ x - program.ineq_h))
    return {
        "min_block_eig": min_eigs,
        "max_eq_residual": eq_res,
        "min_ineq_slack": slack_min,
    }


def solve(
    program: ConicProgram,
    tol: float = DEFAULT_TOL,
    eps_strict: float = DEFAULT_EPS_STRICT,
    t_max: float = DEFAULT_T_MAX,
    box_bound: float = DEFAULT_BOX_BOUND,
    max_iter: int = DEFAULT_MAX_ITER,
    warm_start: Optional[np.ndarray] = None,
    backend: str = "reference",
    early_margin: Optional[float] = None,
) -> ConicSolution:
    """Decide feasibility (or maximize the objective) of a ConicProgram.

    Statuses: FEASIBLE means every block is PSD within tolerance and every
    strict constraint has slack at least eps_strict. INFEASIBLE is certified
    by the margin problem having a negative optimum. MARGINAL covers the
    band in between, NUMERICAL_FAILURE an unconverged interior-point run.
    Infeasibility of a barrier program is never evidence of a privacy
    violation, so callers treat everything but FEASIBLE as unknown.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    program.validate()
    if backend == "cvxopt":
        return _solve_cvxopt(program, tol, eps_strict, t_max, box_bound)
    if backend != "reference":
        raise ValueError(f"unknown backend {backend!r}")

    try:
        x0, N = _eliminate_equalities(program, tol)
    except _EqualityInconsistent as err:
        return ConicSolution(
            status=SolveStatus.INFEASIBLE,
            x=None,
            margin=-math.inf,
            objective_value=None,
            residuals={"max_eq_residual": err.residual},
            iterations=0,
            message="equality system is inconsistent",
        )

    def finish(x: np.ndarray, status: SolveStatus, margin: float, iters: int, msg: str):
        res = _evaluate_point(program, x)
        obj = float(program.objective @ x) if program.objective is not None else None
        return ConicSolution(
            status=status,
            x=x,
            margin=margin,
            objective_value=obj,
            residuals=res,
            iterations=iters,
            message=msg,
        )

    # No free variables after elimination: direct eigenvalue decision.
    if N.shape[1] == 0:
        res = _evaluate_point(program, x0)
        ok = True
        margin = math.inf
        for blk, eig in zip(program.blocks, res["min_block_eig"]):
            need = eps_strict if blk.strict else -10 * tol
            ok = ok and eig >= need
            margin = min(margin, eig)
        if res["min_ineq_slack"] is not math.inf:
            margin = min(margin, res["min_ineq_slack"])
            ok = ok and res["min_ineq_slack"] >= -10 * tol
        status = SolveStatus.FEASIBLE if ok else SolveStatus.INFEASIBLE
        return finish(x0, status, margin, 0, "fixed point decided by eigenvalue check")

    u_warm = None
    if warm_start is not None:
        u_full = N.T @ (np.asarray(warm_start, dtype=float) - x0)
        u_warm = np.append(u_full, 0.0)

    # Stage A: maximize the joint slack over every constraint, starting from
    # a strictly feasible point (t pushed below every initial slack).
    redA = _reduce(program, x0, N, box_bound, shift="all", t_max=t_max,
                   objective=None)
    if u_warm is not None and len(u_warm) == redA.n:
        resA = _ipm(redA, tol=min(tol, 1e-8), max_iter=max_iter, u0=u_warm,
                    early_margin=early_margin)
    else:
        resA = _ipm(redA, tol=min(tol, 1e-8), max_iter=max_iter,
                    early_margin=early_margin)
    f = N.shape[1]
    t_all = float(resA.u[f]) if resA.u is not None else -math.inf
    x_all = x0 + N @ resA.u[:f]

    if not resA.converged:
        if resA.message == "iteration cap reached":
            return finish(x_all, SolveStatus.NUMERICAL_FAILURE, t_all, resA.iterations,
                          f"margin solve did not converge: {resA.message}")
        # fall through with whatever progress was made; classify conservatively
        return finish(x_all, SolveStatus.NUMERICAL_FAILURE, t_all, resA.iterations,
                      f"margin solve failed: {resA.message}")

    if t_all < -10 * tol:
        return finish(x_all, SolveStatus.INFEASIBLE, t_all, resA.iterations,
                      "maximum joint slack is negative")

    has_strict = program.has_strict()
    has_obj = program.objective is not None

    if not has_obj:
        if not has_strict:
            status = SolveStatus.FEASIBLE if t_all >= -10 * tol else SolveStatus.INFEASIBLE
            return finish(x_all, status, t_all, resA.iterations, "joint slack decision")
        if t_all >= eps_strict:
            return finish(x_all, SolveStatus.FEASIBLE, t_all, resA.iterations,
                          "joint slack exceeds the strictness threshold")
        # Strict blocks undecided: maximize slack over strict constraints only.
        redS = _reduce(program, x0, N, box_bound, shift="strict", t_max=t_max,
                       objective=None)
        resS = _ipm(redS, tol=min(tol, 1e-8), max_iter=max_iter,
                    u0=np.append(resA.u[:f], t_all),
                    early_margin=early_margin)
        x_s = x0 + N @ resS.u[:f]
        t_s = float(resS.u[f])
        if not resS.converged:
            return finish(x_s, SolveStatus.NUMERICAL_FAILURE, t_s, resS.iterations,
                          f"strict margin solve failed: {resS.message}")
        res = _evaluate_point(program, x_s)
        nonstrict_ok = all(
            eig >= -10 * tol
            for blk, eig in zip(program.blocks, res["min_block_eig"])
            if not blk.strict
        )
        if t_s >= eps_strict and nonstrict_ok:
            return finish(x_s, SolveStatus.FEASIBLE, t_s, resS.iterations,
                          "strict margin achieved")
        if t_s < -10 * tol:
            return finish(x_s, SolveStatus.INFEASIBLE, t_s, resS.iterations,
                          "maximum strict slack is negative")
        return finish(x_s, SolveStatus.MARGINAL, t_s, resS.iterations,
                      "strict slack below the strictness threshold")

    # Objective present: optimize from the feasible region. Strict blocks are
    # enforced by baking eps_strict into their constant terms.
    prog2 = program
    if has_strict:
        if t_all < eps_strict:
            return finish(x_all, SolveStatus.MARGINAL, t_all, resA.iterations,
                          "strict feasibility unavailable before optimization")
        prog2 = ConicProgram(
            n_vars=program.n_vars,
            blocks=[
                LmiBlock(
                    dim=b.dim,
                    F0=b.F0 - (eps_strict * np.eye(b.dim) if b.strict else 0.0),
                    coeffs=b.coeffs,
                    strict=b.strict,
                    name=b.name,
                )
                for b in program.blocks
            ],
            eq_A=program.eq_A,
            eq_c=program.eq_c,
            ineq_G=program.ineq_G,
            ineq_h=None
            if program.ineq_h is None
            else program.ineq_h
            + (
                eps_strict * np.asarray(program.ineq_strict, dtype=float)
                if program.ineq_strict is not None
                else 0.0
            ),
            ineq_strict=program.ineq_strict,
            objective=program.objective,
        )
    redB = _reduce(prog2, x0, N, box_bound, shift="none", t_max=t_max,
                   objective=program.objective)
    resB = _ipm(redB, tol=tol, max_iter=max_iter, u0=resA.u[:f].copy())
    x_b = x0 + N @ resB.u[:f]
    res = _evaluate_point(program, x_b)
    margin = min(res["min_block_eig"]) if res["min_block_eig"] else math.inf
    if res["min_ineq_slack"] is not math.inf:
        margin = min(margin, res["min_ineq_slack"])
    if not resB.converged:
        return finish(x_b, SolveStatus.NUMERICAL_FAILURE, margin, resB.iterations,
                      f"objective solve failed: {resB.message}")
    return finish(x_b, SolveStatus.FEASIBLE, margin, resB.iterations,
                  "objective maximized")


# --- independent validation ----------------------------------------------------


@dataclass
class SolutionReport:
    min_block_eigs: list[float]
    strict_flags: list[bool]
    max_eq_residual: float
    min_ineq_slack: float
    violations: list[str]

    @property
    def clean(self) -> bool:
        return not self.violations

    def to_json_obj(self) -> dict:
        return {
            "min_block_eigs": self.min_block_eigs,
            "strict_flags": self.strict_flags,
            "max_eq_residual": self.max_eq_residual,
            "min_ineq_slack": None if math.isinf(self.min_ineq_slack) else self.min_ineq_slack,
            "violations": self.violations,
        }


def validate_solution(
    program: ConicProgram,
    solution: ConicSolution,
    sample_tol: float = 1e-6,
) -> SolutionReport:
    """Recompute residuals of a claimed-feasible solution from scratch.

    Uses plain dense eigendecompositions, independent of the solver path.
    """
    if solution.x is None:
        raise ValueError("solution carries no point to validate")
    x = np.asarray(solution.x, dtype=float)
    violations = []
    eigs = []
    flags = []
    for blk in program.blocks:
        S = blk.evaluate(x)
        lam = float(np.linalg.eigvalsh(S)[0]) if S.size else 0.0
        eigs.append(lam)
        flags.append(blk.strict)
        floor = 0.0 if blk.strict else -sample_tol
        if lam < floor - sample_tol:
            violations.append(
                f"block {blk.name or program.blocks.index(blk)}: min eigenvalue {lam:.3e}"
            )
    eq_res = 0.0
    if program.eq_A is not None and len(program.eq_c):
        eq_res = float(np.linalg.norm(program.eq_A @ x - program.eq_c, ord=np.inf))
        if eq_res > sample_tol:
            violations.append(f"equality residual {eq_res:.3e}")
    slack_min = math.inf
    if program.ineq_G is not None and len(program.ineq_h):
        slack = program.ineq_G @ x - program.ineq_h
        slack_min = float(np.min(slack))
        if slack_min < -sample_tol:
            violations.append(f"inequality slack {slack_min:.3e}")
    return SolutionReport(
        min_block_eigs=eigs,
        strict_flags=flags,
        max_eq_residual=eq_res,
        min_ineq_slack=slack_min,
        violations=violations,
    )


# --- optional external backend ---------------------------------------------------


def _solve_cvxopt(program, tol, eps_strict, t_max, box_bound) -> ConicSolution:
    """Cross-checking backend through cvxopt's conelp SDP interface.

    Solves the same margin reformulation as the reference backend (shift on
    every constraint) and classifies statuses identically.
    """
    try:
        import cvxopt
        import cvxopt.solvers
    except ImportError as err:  # pragma: no cover - environment dependent
        raise RuntimeError("cvxopt backend requested but cvxopt is not installed") from err

    try:
        x0, N = _eliminate_equalities(program, tol)
    except _EqualityInconsistent as err:
        return ConicSolution(
            status=SolveStatus.INFEASIBLE, x=None, margin=-math.inf,
            objective_value=None, residuals={"max_eq_residual": err.residual},
            iterations=0, message="equality system is inconsistent",
        )
    if N.shape[1] == 0:
        return solve(program, tol=tol, eps_strict=eps_strict, backend="reference")

    red = _reduce(program, x0, N, box_bound, shift="all", t_max=t_max, objective=None)
    n = red.n
    c = cvxopt.matrix(-red.b)
    Gs = []
    hs = []
    for blk in red.blocks:
        d = blk.C.shape[0]
        Gk = np.zeros((d * d, n))
        for k, j in enumerate(blk.idx):
            Gk[:, j] = -blk.A[k].reshape(-1)
        Gs.append(cvxopt.matrix(Gk))
        hs.append(cvxopt.matrix(blk.C))
    Gl = cvxopt.matrix(-red.G)
    hl = cvxopt.matrix(red.h0)
    cvxopt.solvers.options["show_progress"] = False
    sol = cvxopt.solvers.sdp(c, Gl=Gl, hl=hl, Gs=Gs, hs=hs)
    if sol["x"] is None:
        return ConicSolution(
            status=SolveStatus.NUMERICAL_FAILURE, x=None, margin=-math.inf,
            objective_value=None, residuals={}, iterations=0,
            message=f"cvxopt status {sol['status']}",
        )
    u = np.array(sol["x"]).ravel()
    f = N.shape[1]
    x = x0 + N @ u[:f]
    t_all = float(u[f])
    res = _evaluate_point(program, x)
    obj = float(program.objective @ x) if program.objective is not None else None
    if t_all < -10 * tol:
        status = SolveStatus.INFEASIBLE
    elif program.has_strict() and t_all < eps_strict:
        status = SolveStatus.MARGINAL
    else:
        status = SolveStatus.FEASIBLE
    if program.objective is not None and status is SolveStatus.FEASIBLE:
        # One more pass maximizing the objective over the feasible set.
        red2 = _reduce(program, x0, N, box_bound, shift="none", t_max=t_max,
                       objective=program.objective)
        c2 = cvxopt.matrix(-red2.b)
        Gs2 = []
        hs2 = []
        for blk in red2.blocks:
            d = blk.C.shape[0]
            Gk = np.zeros((d * d, red2.n))
            for k, j in enumerate(blk.idx):
                Gk[:, j] = -blk.A[k].reshape(-1)
            Gs2.append(cvxopt.matrix(Gk))
            hs2.append(cvxopt.matrix(blk.C))
        sol2 = cvxopt.solvers.sdp(
            c2, Gl=cvxopt.matrix(-red2.G), hl=cvxopt.matrix(red2.h0), Gs=Gs2, hs=hs2
        )
        if sol2["x"] is not None:
            u2 = np.array(sol2["x"]).ravel()
            x = x0 + N @ u2[: N.shape[1]]
            res = _evaluate_point(program, x)
            obj = float(program.objective @ x)
    return ConicSolution(
        status=status, x=x, margin=t_all, objective_value=obj,
        residuals=res, iterations=0, message="cvxopt backend",
    )
