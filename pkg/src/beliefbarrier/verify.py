"""Privacy verification: condition assembly, threshold search, validation.

Three certificate routes, all sound by construction:

  - MDP: quadratic barrier b' V b over the augmented belief (b, 1), found by
    a semidefinite program (S-procedure containment of the initial polytope,
    halfspace positivity on the unsafe set, decrease under every H_a).
  - POMDP, all time: polynomial barrier B(b) with SOS multipliers; the
    Bayesian update enters as a rational map whose denominator is cleared
    against B's degree.
  - POMDP, finite horizon: one polynomial per time step (or optionally a
    single polynomial in (t, b)), decrease enforced stepwise.

Localization. The conditions can be stated globally, restricted to the
invariant sum slice {sum(b) = s}, or restricted to the belief hypercube.
Column-stochastic updates conserve the coordinate sum, so slice
localization is sound for MDPs outright. POMDP updates renormalize, which
breaks the slice only on the very first step when the initial belief mass
differs from 1; that step is covered by explicit per-branch decrease
constraints. Localized certificates are validated on the matching domain.

Infeasibility of any program is never reported as a privacy violation: the
conditions are sufficient only, and refutation is the falsifier's job.
"""

from __future__ import annotations

import dataclasses
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import conic
from .belief import falsify, mdp_update, pomdp_update, secret_mass
from .conic import ConicProgram, LmiBlock, SolveStatus
from .models import (
    BeliefPolytope,
    Model,
    ModelFormatError,
    PointBelief,
    PrivacySpec,
    SemialgebraicSet,
    initial_polytope_matrix,
    initial_set_polynomials,
    initial_sum,
    unsafe_halfspace,
)
from .poly import Monomial, Polynomial, RationalMap, compose_rational
from .sos import (
    LinExpr,
    PolyExpression,
    SosCertificate,
    SosProgram,
)

S_FLOOR = 1e-6
FIRST_STEP_PROB_TOL = 1e-12
DECREASE_TOL = 1e-7


@dataclass(frozen=True)
class Method:
    kind: str                      # "mdp-sdp" | "pomdp-finite-sos" | "pomdp-infinite-sos"
    degree: Optional[int] = None
    horizon: Optional[int] = None

    def to_json_obj(self) -> dict:
        return {k: v for k, v in dataclasses.asdict(self).items() if v is not None}


@dataclass
class MatrixCertificate:
    """Quadratic barrier b' V b on the augmented belief, with multipliers."""

    V: np.ndarray
    s_u: float
    U: np.ndarray
    localize: str
    slice_sum: Optional[float]

    def barrier(self, b: np.ndarray) -> float:
        bbar = np.append(np.asarray(b, dtype=float), 1.0)
        return float(bbar @ self.V @ bbar)

    def barrier_polynomial(self, n: int) -> Polynomial:
        terms: dict[Monomial, float] = {}
        unit = np.eye(n, dtype=int)
        for i in range(n + 1):
            for j in range(n + 1):
                c = self.V[i, j]
                if abs(c) < 1e-16:
                    continue
                if i < n and j < n:
                    m = tuple(unit[i] + unit[j])
                elif i < n:
                    m = tuple(unit[i])
                elif j < n:
                    m = tuple(unit[j])
                else:
                    m = (0,) * n
                terms[m] = terms.get(m, 0.0) + c
        return Polynomial(n, terms)

    def to_json_obj(self) -> dict:
        return {
            "V": self.V.tolist(),
            "s_u": self.s_u,
            "U": self.U.tolist(),
            "localize": self.localize,
            "slice_sum": self.slice_sum,
        }


@dataclass
class PolynomialCertificate:
    """Barrier polynomial(s) plus the SOS machinery that certified them."""

    barriers: list[Polynomial]     # single entry for all-time, T+1 for finite
    sos: SosCertificate
    localize: str
    slice_sum: Optional[float]
    degree: int

    def barrier(self, b: np.ndarray, t: Optional[int] = None) -> float:
        poly = self.barriers[-1 if t is None else min(t, len(self.barriers) - 1)]
        return poly.eval(list(b))

    def to_json_obj(self) -> dict:
        return {
            "barriers": [p.to_json_obj() for p in self.barriers],
            "certificate": self.sos.to_json_obj(),
            "localize": self.localize,
            "slice_sum": self.slice_sum,
            "degree": self.degree,
        }


Certificate = Union[MatrixCertificate, PolynomialCertificate]


@dataclass
class VerificationOutcome:
    status: str                    # "certified" | "unknown"
    gamma: float
    method: Method
    certificate: Optional[Certificate]
    diagnostics: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def certified(self) -> bool:
        return self.status == "certified"

    def to_json_obj(self) -> dict:
        return {
            "status": self.status,
            "gamma": self.gamma,
            "method": self.method.to_json_obj(),
            "certificate": None
            if self.certificate is None
            else self.certificate.to_json_obj(),
            "diagnostics": _jsonable(self.diagnostics),
            "wall_time": self.wall_time,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, SolveStatus):
        return obj.value
    return obj


# --- shared geometry -----------------------------------------------------------


def augmented_transition(H: np.ndarray) -> np.ndarray:
    """H extended to the augmented belief: diag(H, 1), so (b,1) -> (Hb, 1)."""
    n = H.shape[0]
    out = np.zeros((n + 1, n + 1))
    out[:n, :n] = H
    out[n, n] = 1.0
    return out


def unsafe_quadratic_form(w: np.ndarray, lam: float) -> np.ndarray:
    """Symmetric W with (b,1)' W (b,1) = w.b - lam."""
    n = len(w)
    W = np.zeros((n + 1, n + 1))
    W[:n, n] = w / 2.0
    W[n, :n] = w / 2.0
    W[n, n] = -lam
    return W


def _sum_slice_vector(n: int, s0: float) -> np.ndarray:
    """e with e.(b,1) = sum(b) - s0."""
    e = np.ones(n + 1)
    e[n] = -s0
    return e


def _box_forms(n: int) -> list[np.ndarray]:
    """Quadratic forms of b_i (1 - b_i), nonnegative on the hypercube."""
    forms = []
    for i in range(n):
        Phi = np.zeros((n + 1, n + 1))
        Phi[i, i] = -1.0
        Phi[i, n] = 0.5
        Phi[n, i] = 0.5
        forms.append(Phi)
    return forms


def branch_maps(model: Model) -> dict[tuple[str, str], RationalMap]:
    """Rational belief-update map per (action, observation) branch.

    Numerators S_i(b) = O(i, a, z) (H_a b)_i and shared denominator
    R(b) = sum_i S_i(b); branches whose observation column is identically
    zero cannot occur and are dropped.
    """
    if not model.is_pomdp:
        raise ValueError("branch maps require a POMDP")
    n = model.n_states
    unit = np.eye(n, dtype=int)
    maps = {}
    for a in model.actions:
        H = model.transition(a)
        O = model.observation_matrix(a)
        for zi, z in enumerate(model.observations):
            col = O[:, zi]
            if np.max(col) <= 0.0:
                continue
            nums = []
            for i in range(n):
                terms = {
                    tuple(unit[j]): col[i] * H[i, j]
                    for j in range(n)
                    if abs(col[i] * H[i, j]) > 1e-16
                }
                nums.append(Polynomial(n, terms))
            denom = Polynomial.zero(n)
            for s in nums:
                denom = denom + s
            if denom.is_zero():
                continue
            maps[(a, z)] = RationalMap(numerators=tuple(nums), denominator=denom)
    return maps


def _resolve_localize(localize: str, spec: PrivacySpec,
                      auto_mode: str = "full") -> tuple[str, Optional[float]]:
    """Pick the localization family and its slice value.

    Modes: "none" (conditions hold over all of R^n), "sum" (restrict to the
    invariant coordinate-sum slice), "box" (restrict to the unit hypercube),
    "full" (both), and "reference" (unit-simplex slice regardless of the
    initial mass, matching how such conditions are conventionally set up in
    SOS toolchains). The reference mode is NOT sound when the initial belief
    mass differs from 1: the very first update step escapes the localized
    decrease condition. It exists to reproduce reported reference values
    and is never chosen automatically.
    """
    if localize == "auto":
        s0 = initial_sum(spec)
        return (auto_mode, s0) if s0 is not None else ("box", None)
    if localize in ("sum", "full", "simplex"):
        s0 = initial_sum(spec)
        if s0 is None:
            raise ModelFormatError(
                "sum localization requires a common coordinate sum over the "
                "initial set"
            )
        return localize, s0
    if localize == "reference":
        return "reference", 1.0
    if localize in ("none", "box"):
        return localize, None
    raise ValueError(f"unknown localization mode {localize!r}")


# --- MDP route -------------------------------------------------------------------


def build_mdp_program(
    model: Model, spec: PrivacySpec, localize: str = "auto"
) -> tuple[ConicProgram, dict]:
    """Assemble the semidefinite feasibility program for the MDP barrier.

    Variables: symmetric V over the augmented belief, an entrywise-positive
    symmetric multiplier U for the initial polytope, a positive scalar for
    the unsafe halfspace, and localization multipliers. Blocks:

        positivity:  V - s_u W        - (loc)  > 0
        initial:    -V - E0' U E0     - (loc)  > 0
        decrease:    V - Hbar' V Hbar - (loc) >= 0   for every action

    The decrease block is nonstrict: the barrier argument needs only
    nonincrease, and strictness would be unattainable for e.g. identity
    dynamics.
    """
    mode, s0 = _resolve_localize(localize, spec)
    n = model.n_states
    hs = unsafe_halfspace(spec, model)
    E0 = initial_polytope_matrix(spec, model)
    n0 = E0.shape[0]
    N = n + 1

    names: list[str] = []

    def var(name: str) -> int:
        names.append(name)
        return len(names) - 1

    v_idx = {}
    for i in range(N):
        for j in range(i, N):
            v_idx[(i, j)] = var(f"V[{i},{j}]")
    u_idx = {}
    for k in range(n0):
        for l in range(k, n0):
            u_idx[(k, l)] = var(f"U[{k},{l}]")
    su_idx = var("s_u")

    def sym_basis(i: int, j: int, dim: int) -> np.ndarray:
        E = np.zeros((dim, dim))
        E[i, j] = 1.0
        E[j, i] = 1.0
        return E

    blocks: list[LmiBlock] = []
    localizer_index: dict[str, dict] = {}

    def localizers(tag: str) -> dict[int, np.ndarray]:
        """Fresh localization multipliers for one block; returns coeff map."""
        coeffs: dict[int, np.ndarray] = {}
        entry: dict = {}
        if mode in ("sum", "full", "reference"):
            e = _sum_slice_vector(n, s0)
            entry["slice_vars"] = []
            for r in range(N):
                d = np.zeros(N)
                d[r] = 1.0
                outer = 0.5 * (np.outer(e, d) + np.outer(d, e))
                idx = var(f"{tag}.slice[{r}]")
                coeffs[idx] = -outer
                entry["slice_vars"].append(idx)
        if mode in ("box", "full", "reference"):
            entry["box_vars"] = []
            for i, Phi in enumerate(_box_forms(n)):
                idx = var(f"{tag}.box[{i}]")
                coeffs[idx] = -Phi
                entry["box_vars"].append(idx)
        localizer_index[tag] = entry
        return coeffs

    # Unsafe positivity block: V - s_u W - loc > 0.
    W = unsafe_quadratic_form(hs.w, hs.lam)
    coeffs = {v_idx[(i, j)]: sym_basis(i, j, N) for (i, j) in v_idx}
    coeffs[su_idx] = -W
    for idx, mat in localizers("unsafe").items():
        coeffs[idx] = mat
    blocks.append(LmiBlock(dim=N, F0=np.zeros((N, N)), coeffs=coeffs, strict=True,
                           name="unsafe-positivity"))

    # Initial containment block: -V - E0' U E0 - loc > 0. The reference mode
    # must not localize here: its slice misses the initial point, and a
    # multiplier that is free off the slice would let the barrier go
    # nonnegative at the initial belief.
    coeffs = {v_idx[(i, j)]: -sym_basis(i, j, N) for (i, j) in v_idx}
    for (k, l), idx in u_idx.items():
        rk = E0[k]
        rl = E0[l]
        outer = np.outer(rk, rl)
        mat = -(outer + outer.T) if k != l else -np.outer(rk, rk)
        coeffs[idx] = mat
    if mode != "reference":
        for idx, mat in localizers("initial").items():
            coeffs[idx] = mat
    blocks.append(LmiBlock(dim=N, F0=np.zeros((N, N)), coeffs=coeffs, strict=True,
                           name="initial-negativity"))

    # Decrease blocks: V - Hbar' V Hbar - loc >= 0 per action.
    for a in model.actions:
        Hbar = augmented_transition(model.transition(a))
        coeffs = {}
        for (i, j), idx in v_idx.items():
            E = sym_basis(i, j, N)
            coeffs[idx] = E - Hbar.T @ E @ Hbar
        for idx, mat in localizers(f"decrease[{a}]").items():
            coeffs[idx] = mat
        blocks.append(
            LmiBlock(dim=N, F0=np.zeros((N, N)), coeffs=coeffs, strict=False,
                     name=f"decrease-{a}")
        )

    m = len(names)
    rows = []
    consts = []
    strict_rows = []
    # positive entries of U, positive s_u
    for idx in u_idx.values():
        row = np.zeros(m)
        row[idx] = 1.0
        rows.append(row)
        consts.append(0.0)
        strict_rows.append(True)
    row = np.zeros(m)
    row[su_idx] = 1.0
    rows.append(row)
    consts.append(0.0)
    strict_rows.append(True)
    # box multipliers are sign-constrained; slice multipliers are free
    for entry in localizer_index.values():
        for idx in entry.get("box_vars", []):
            row = np.zeros(m)
            row[idx] = 1.0
            rows.append(row)
            consts.append(0.0)
            strict_rows.append(False)

    prog = ConicProgram(
        n_vars=m,
        blocks=blocks,
        ineq_G=np.array(rows),
        ineq_h=np.array(consts),
        ineq_strict=np.array(strict_rows, dtype=bool),
        var_names=names,
    )
    prog.validate()
    index = {
        "v_idx": v_idx,
        "u_idx": u_idx,
        "su_idx": su_idx,
        "n": n,
        "n0": n0,
        "mode": mode,
        "slice_sum": s0,
    }
    return prog, index


def _mdp_certificate(index: dict, x: np.ndarray) -> MatrixCertificate:
    n = index["n"]
    N = n + 1
    V = np.zeros((N, N))
    for (i, j), idx in index["v_idx"].items():
        V[i, j] = x[idx]
        V[j, i] = x[idx]
    n0 = index["n0"]
    U = np.zeros((n0, n0))
    for (k, l), idx in index["u_idx"].items():
        U[k, l] = x[idx]
        U[l, k] = x[idx]
    return MatrixCertificate(
        V=V,
        s_u=float(x[index["su_idx"]]),
        U=U,
        localize=index["mode"],
        slice_sum=index["slice_sum"],
    )


def verify_mdp(
    model: Model,
    spec: PrivacySpec,
    localize: str = "auto",
    tol: float = 1e-7,
    validate: bool = True,
    validation_samples: int = 2000,
    falsify_depth: Optional[int] = 8,
    dump_sdp: Optional[str] = None,
    seed: int = 0,
) -> VerificationOutcome:
    """Certify the privacy threshold of an MDP, or report unknown.

    Raises ModelFormatError when the initial set already touches the unsafe
    set (no certificate can exist and the question is ill-posed).
    """
    if model.is_pomdp:
        raise ValueError("verify_mdp expects a model without observations")
    start = time.monotonic()
    spec.validate(model, check_disjoint=True)
    prog, index = build_mdp_program(model, spec, localize)
    if dump_sdp:
        with open(dump_sdp, "w") as fh:
            fh.write(prog.dump_json())
    sol = conic.solve(prog, tol=tol)
    method = Method(kind="mdp-sdp")
    diagnostics = {
        "solver": {
            "status": sol.status,
            "margin": sol.margin,
            "iterations": sol.iterations,
            "message": sol.message,
        },
        "localize": index["mode"],
        "slice_sum": index["slice_sum"],
    }
    actual_sum = initial_sum(spec)
    if index["mode"] == "reference" and (actual_sum is None or abs(actual_sum - 1.0) > 1e-9):
        diagnostics["reference_gap"] = (
            "initial beliefs are off the unit slice; the localized conditions "
            "do not constrain the system's actual trajectories"
        )
    if sol.status is not SolveStatus.FEASIBLE:
        _attach_falsifier(diagnostics, model, spec, falsify_depth)
        return VerificationOutcome(
            status="unknown", gamma=spec.lam, method=method, certificate=None,
            diagnostics=diagnostics, wall_time=time.monotonic() - start,
        )
    cert = _mdp_certificate(index, sol.x)
    outcome = VerificationOutcome(
        status="certified", gamma=spec.lam, method=method, certificate=cert,
        diagnostics=diagnostics, wall_time=time.monotonic() - start,
    )
    if validate:
        report = validate_certificate(model, spec, outcome,
                                      n_samples=validation_samples, seed=seed)
        diagnostics["validation"] = report.to_json_obj()
        if not report.passed:
            outcome.status = "unknown"
            outcome.certificate = None
    outcome.wall_time = time.monotonic() - start
    return outcome


def _attach_falsifier(diagnostics: dict, model: Model, spec: PrivacySpec,
                      depth: Optional[int]) -> None:
    if depth is None:
        return
    try:
        witness, bound = falsify(model, spec, depth=depth)
    except Exception as err:  # budget or sampling problems are advisory here
        diagnostics["falsifier"] = {"error": str(err)}
        return
    diagnostics["falsifier"] = {
        "depth": depth,
        "lower_bound": bound,
        "witness": None if witness is None else witness.to_json_obj(),
    }


# --- POMDP routes ----------------------------------------------------------------


def _compose_expr(B: PolyExpression, rmap: RationalMap, total_degree: int) -> PolyExpression:
    """R^d B(S/R) for an expression B with affine coefficients.

    Each monomial of B composes to a fixed polynomial, scaled by the
    monomial's coefficient expression.
    """
    n = rmap.n_vars
    out = PolyExpression(n)
    cache: dict[Monomial, Polynomial] = {}
    for m, lin in B.terms.items():
        if m not in cache:
            mono_poly = Polynomial(B.n_vars, {m: 1.0})
            # degree-aware prefactor: R^(total - |m|)
            composed = compose_rational(mono_poly, rmap)
            deficit = total_degree - sum(m)
            if deficit:
                composed = composed * (rmap.denominator ** deficit)
            cache[m] = composed
        for mono, c in cache[m].terms.items():
            out._merge(mono, lin.scale(c))
    return out


def _sum_poly(n: int, s0: float) -> Polynomial:
    unit = np.eye(n, dtype=int)
    terms = {tuple(unit[i]): 1.0 for i in range(n)}
    terms[(0,) * n] = -s0
    return Polynomial(n, terms)


def _secret_poly(n: int, w: np.ndarray, lam: float) -> Polynomial:
    unit = np.eye(n, dtype=int)
    terms = {tuple(unit[i]): w[i] for i in range(n) if w[i]}
    terms[(0,) * n] = -lam
    return Polynomial(n, terms)


def _box_polys(n: int) -> list[Polynomial]:
    unit = np.eye(n, dtype=int)
    polys = []
    for i in range(n):
        polys.append(Polynomial(n, {tuple(unit[i]): 1.0}))
        polys.append(Polynomial(n, {(0,) * n: 1.0, tuple(unit[i]): -1.0}))
    return polys


def _initial_points(spec: PrivacySpec, interior: int = 16, seed: int = 0) -> list[np.ndarray]:
    init = spec.initial_set
    if isinstance(init, PointBelief):
        return [np.array(init.values)]
    if isinstance(init, BeliefPolytope):
        verts = init.vertices()
        rng = np.random.default_rng(seed)
        pts = [np.asarray(v) for v in verts]
        if verts:
            vmat = np.array(verts)
            for _ in range(interior):
                pts.append(rng.dirichlet(np.ones(len(verts))) @ vmat)
        return pts
    raise ModelFormatError(
        "semialgebraic initial sets need explicit sample points for the "
        "first-step constraints"
    )


def _build_pomdp_program(
    model: Model,
    spec: PrivacySpec,
    degree: int,
    horizon: Optional[int],
    localize: str,
    multiplier_degree: Optional[int],
    cover_initial_step: bool,
    time_polynomial: bool = False,
) -> tuple[SosProgram, dict]:
    """Assemble the SOS feasibility program for a POMDP barrier.

    Slice localization is realized by substituting the slice equation into
    the localized conditions (equivalent to carrying a free multiplier on
    the slice polynomial, but one belief variable smaller). For a point
    initial set the initial-negativity condition collapses to the single
    linear constraint B(b0) <= -s2: the paired halfspace multipliers span
    the full ideal of the point, so the polynomial condition carries no
    extra content.
    """
    if degree % 2 or degree < 2:
        raise ValueError("certificate degree must be even and at least 2")
    mode, s0 = _resolve_localize(localize, spec, auto_mode="simplex")
    n = model.n_states
    hs = unsafe_halfspace(spec, model)
    maps = branch_maps(model)
    mult_deg = multiplier_degree if multiplier_degree is not None else degree
    if mult_deg % 2:
        raise ValueError("multiplier degree must be even")

    builder = SosProgram()
    s1 = builder.scalar_var("s1", lower=S_FLOOR, strict=True)
    s2 = builder.scalar_var("s2", lower=S_FLOOR, strict=True)

    if time_polynomial and horizon is not None:
        l0 = initial_set_polynomials(spec, model)
        return _build_time_polynomial_program(
            builder, model, spec, degree, horizon, mode, s0, mult_deg,
            cover_initial_step, maps, l0, hs, s1, s2,
        )

    if horizon is None:
        barriers = [builder.free_poly(n, degree, "B")]
    else:
        barriers = [builder.free_poly(n, degree, f"B{t}") for t in range(horizon + 1)]

    secret = _secret_poly(n, hs.w, hs.lam)
    slice_modes = ("sum", "full", "simplex", "reference")
    restricted = mode in slice_modes

    unit = np.eye(n - 1, dtype=int) if n > 1 else None

    def slice_replacement(total: float) -> Polynomial:
        # b_n = total - sum of the remaining coordinates
        terms = {(0,) * (n - 1): total}
        for i in range(n - 1):
            terms[tuple(unit[i])] = -1.0
        return Polynomial(n - 1, terms)

    unit_replacement = slice_replacement(1.0) if restricted else None

    def restricted_cone() -> list[Polynomial]:
        # b_i >= 0 on the slice, including the eliminated coordinate
        polys = []
        for i in range(n - 1):
            polys.append(Polynomial(n - 1, {tuple(unit[i]): 1.0}))
        polys.append(unit_replacement)
        return polys

    def assert_condition(expr: PolyExpression, tag: str, expr_degree: int,
                         replacement: Optional[Polynomial]) -> None:
        """Localize per mode, then constrain to be SOS."""
        if restricted and replacement is not None:
            expr = expr.eliminate_last_var(replacement)
            if mode == "simplex":
                deg = min(expr_degree - 1, degree)
                deg = max(deg - (deg % 2), 0)
                for k, g in enumerate(restricted_cone()):
                    _, s_expr = builder.new_sos_var(n - 1, deg, f"{tag}.pos{k}")
                    expr = expr - s_expr.mul_poly(g)
        elif mode in ("box", "full"):
            deg = min(expr_degree - 1, degree)
            deg = max(deg - (deg % 2), 0)
            for k, g in enumerate(_box_polys(n)):
                _, s_expr = builder.new_sos_var(n, deg, f"{tag}.box{k}")
                expr = expr - s_expr.mul_poly(g)
        builder.assert_sos(expr, tag)

    # Unsafe positivity: B_last - p_u (w.b - lam) - s1 in Sigma on the unit
    # slice (reachable unsafe beliefs at t >= 1 carry unit mass).
    B_last = barriers[-1]
    _, p_u = builder.new_sos_var(n, mult_deg, "p_u")
    expr = B_last - p_u.mul_poly(secret) - PolyExpression.constant(s1, n)
    assert_condition(expr, "unsafe", degree + mult_deg + 1, unit_replacement)

    # Initial negativity.
    B0 = barriers[0]
    point_init = isinstance(spec.initial_set, PointBelief)
    if point_init:
        b0 = np.asarray(spec.initial_set.values, dtype=float)
        row: dict[int, float] = {}
        const = 0.0
        # -B(b0) - s2 >= 0
        for m, lin in B0.terms.items():
            v = _mono_eval(m, b0)
            for vi, c in lin.coeffs.items():
                row[vi] = row.get(vi, 0.0) - c * v
            const -= lin.const * v
        for vi, c in s2.coeffs.items():
            row[vi] = row.get(vi, 0.0) - c
        builder.ineq_rows.append(row)
        builder.ineq_consts.append(-const)
        builder.ineq_strict.append(False)
    else:
        l0 = initial_set_polynomials(spec, model)
        expr = -B0 - PolyExpression.constant(s2, n)
        for k, l in enumerate(l0):
            _, p_k = builder.new_sos_var(n, mult_deg, f"p0_{k}")
            expr = expr + p_k.mul_poly(l)
        init_replacement = (
            slice_replacement(s0) if (restricted and mode != "reference" and s0 is not None)
            else None
        )
        assert_condition(expr, "initial", degree + mult_deg + 1, init_replacement)

    # Decrease along every branch: all-time pairs (B, B), finite pairs
    # (B_{t-1}, B_t).
    first_step_rows: list[str] = []
    steps = (
        [(0, "B", "B")]
        if horizon is None
        else [(t, f"B{t - 1}", f"B{t}") for t in range(1, horizon + 1)]
    )
    needs_first_step = (
        mode in ("sum", "full", "simplex")
        and s0 is not None
        and abs(s0 - 1.0) > 1e-9
        and cover_initial_step
    )
    for step_t, prev_name, next_name in steps:
        prev = builder.tracked_exprs[prev_name]
        nxt = builder.tracked_exprs[next_name]
        first = horizon is not None and step_t == 1
        for (a, z), rmap in maps.items():
            Rd = rmap.denominator ** degree
            expr = prev.mul_poly(Rd) - _compose_expr(nxt, rmap, degree)
            tag = f"dec[{prev_name}->{next_name},{a},{z}]"
            if first and needs_first_step:
                # the first transition starts on the initial slice
                replacement = slice_replacement(s0)
            else:
                replacement = unit_replacement
            assert_condition(expr, tag, 2 * degree, replacement)

    # All-time certificates on the unit slice miss the jump from an
    # off-slice initial belief; pin those steps down with explicit linear
    # constraints at the initial points.
    if horizon is None and needs_first_step:
        points = _initial_points(spec)
        B = barriers[0]
        for p_i, b0 in enumerate(points):
            for (a, z), rmap in maps.items():
                r0 = rmap.denominator.eval(list(b0))
                if r0 <= FIRST_STEP_PROB_TOL:
                    continue
                b1 = np.array(rmap.eval(list(b0)))
                row = {}
                const = 0.0
                for m, lin in B.terms.items():
                    delta = _mono_eval(m, b0) - _mono_eval(m, b1)
                    for vi, c in lin.coeffs.items():
                        row[vi] = row.get(vi, 0.0) + c * delta
                    const += lin.const * delta
                builder.ineq_rows.append(row)
                builder.ineq_consts.append(-const)
                builder.ineq_strict.append(False)
                first_step_rows.append(f"b0[{p_i}]-({a},{z})")

    index = {
        "mode": mode,
        "slice_sum": s0,
        "degree": degree,
        "horizon": horizon,
        "barrier_names": [f"B{t}" for t in range(horizon + 1)] if horizon is not None else ["B"],
        "first_step_rows": first_step_rows,
        "time_polynomial": False,
    }
    return builder, index


def _mono_eval(m: Monomial, point: np.ndarray) -> float:
    v = 1.0
    for x, e in zip(point, m):
        if e:
            v *= x**e
    return v


def _build_time_polynomial_program(
    builder: SosProgram, model: Model, spec: PrivacySpec, degree: int,
    horizon: int, mode: str, s0: Optional[float], mult_deg: int,
    cover_initial_step: bool, maps, l0, hs, s1, s2,
):
    """Literal reading: one barrier in (t, b), SOS over both jointly.

    Variables are ordered (t, b_1..b_n); time-substituted conditions reduce
    back to the belief variables.
    """
    n = model.n_states
    nt = n + 1
    B = builder.free_poly(nt, degree, "B")

    def at_time(expr: PolyExpression, tval: float) -> PolyExpression:
        out = PolyExpression(n)
        for m, lin in expr.terms.items():
            k = m[0]
            scale = tval**k if k else 1.0
            if scale == 0.0 and k:
                continue
            out._merge(tuple(m[1:]), lin.scale(scale))
        return out

    secret = _secret_poly(n, hs.w, hs.lam)
    unit_sum = _sum_poly(n, 1.0)
    init_sum_poly = None if s0 is None else _sum_poly(n, s0)

    def localize_b(expr: PolyExpression, tag: str, expr_degree: int,
                   slice_poly: Optional[Polynomial]) -> PolyExpression:
        if mode in ("sum", "full", "reference") and slice_poly is not None:
            r = builder.free_poly(n, max(expr_degree - 1, 0), f"{tag}.slice", track=False)
            expr = expr - r.mul_poly(slice_poly)
        return expr

    _, p_u = builder.new_sos_var(n, mult_deg, "p_u")
    expr = at_time(B, float(horizon)) - p_u.mul_poly(secret) - PolyExpression.constant(s1, n)
    expr = localize_b(expr, "unsafe", degree + mult_deg + 1,
                      unit_sum if horizon >= 1 else init_sum_poly)
    builder.assert_sos(expr, "unsafe")

    expr = -at_time(B, 0.0) - PolyExpression.constant(s2, n)
    for k, l in enumerate(l0):
        _, p_k = builder.new_sos_var(n, mult_deg, f"p0_{k}")
        expr = expr + p_k.mul_poly(l)
    expr = localize_b(expr, "initial", degree + mult_deg + 1, init_sum_poly)
    builder.assert_sos(expr, "initial")

    # Decrease in Sigma[t, b]: lift the branch maps to pass t through and
    # substitute t -> t - 1 in the predecessor barrier.
    tvar = Polynomial.variable(0, nt)
    unit_sum_tb = _lift_to_tb(unit_sum)
    for (a, z), rmap in maps.items():
        lifted_nums = (tvar * _lift_to_tb(rmap.denominator),) + tuple(
            _lift_to_tb(s) for s in rmap.numerators
        )
        lifted = RationalMap(numerators=lifted_nums,
                             denominator=_lift_to_tb(rmap.denominator))
        composed = _compose_expr(B, lifted, degree)
        prev = _shift_time(B, -1.0)
        Rd = _lift_to_tb(rmap.denominator) ** degree
        expr = prev.mul_poly(Rd) - composed
        tag = f"dec[{a},{z}]"
        if mode in ("sum", "full", "reference"):
            r = builder.free_poly(nt, max(2 * degree - 1, 0), f"{tag}.slice", track=False)
            expr = expr - r.mul_poly(unit_sum_tb)
        builder.assert_sos(expr, tag)

    first_step_rows: list[str] = []
    if (mode in ("sum", "full") and s0 is not None and abs(s0 - 1.0) > 1e-9
            and cover_initial_step):
        points = _initial_points(spec)
        for p_i, b0 in enumerate(points):
            for (a, z), rmap in maps.items():
                r0 = rmap.denominator.eval(list(b0))
                if r0 <= FIRST_STEP_PROB_TOL:
                    continue
                b1 = np.array(rmap.eval(list(b0)))
                row: dict[int, float] = {}
                const = 0.0
                for m, lin in B.terms.items():
                    delta = _mono_eval(m, np.append(0.0, b0)) - _mono_eval(
                        m, np.append(1.0, b1)
                    )
                    for vi, c in lin.coeffs.items():
                        row[vi] = row.get(vi, 0.0) + c * delta
                    const += lin.const * delta
                builder.ineq_rows.append(row)
                builder.ineq_consts.append(-const)
                builder.ineq_strict.append(False)
                first_step_rows.append(f"b0[{p_i}]-({a},{z})")

    index = {
        "mode": mode,
        "slice_sum": s0,
        "degree": degree,
        "horizon": horizon,
        "barrier_names": ["B"],
        "first_step_rows": first_step_rows,
        "time_polynomial": True,
    }
    return builder, index


def _lift_to_tb(p: Polynomial) -> Polynomial:
    """Embed a polynomial in b into variables (t, b)."""
    return Polynomial(p.n_vars + 1, {(0,) + m: c for m, c in p.terms.items()})


def _shift_time(B: PolyExpression, offset: float) -> PolyExpression:
    """B(t + offset, b) for an expression over (t, b)."""
    nt = B.n_vars
    out = PolyExpression(nt)
    from math import comb

    for m, lin in B.terms.items():
        k = m[0]
        rest = m[1:]
        for j in range(k + 1):
            c = comb(k, j) * (offset ** (k - j))
            if c == 0.0:
                continue
            out._merge((j,) + rest, lin.scale(c))
    return out


def _verify_pomdp(
    model: Model,
    spec: PrivacySpec,
    degree: int,
    horizon: Optional[int],
    localize: str,
    multiplier_degree: Optional[int],
    cover_initial_step: bool,
    time_polynomial: bool,
    tol: float,
    validate: bool,
    validation_samples: int,
    falsify_depth: Optional[int],
    dump_sdp: Optional[str],
    seed: int,
) -> VerificationOutcome:
    if not model.is_pomdp:
        raise ValueError("POMDP verification expects observations")
    start = time.monotonic()
    spec.validate(model, check_disjoint=True)
    builder, index = _build_pomdp_program(
        model, spec, degree, horizon, localize, multiplier_degree,
        cover_initial_step, time_polynomial,
    )
    prog = builder.compile()
    if dump_sdp:
        with open(dump_sdp, "w") as fh:
            fh.write(prog.dump_json())
    sol = conic.solve(prog, tol=tol)
    method = Method(
        kind="pomdp-infinite-sos" if horizon is None else "pomdp-finite-sos",
        degree=degree,
        horizon=horizon,
    )
    diagnostics = {
        "solver": {
            "status": sol.status,
            "margin": sol.margin,
            "iterations": sol.iterations,
            "message": sol.message,
        },
        "localize": index["mode"],
        "slice_sum": index["slice_sum"],
        "program_size": {
            "variables": prog.n_vars,
            "blocks": [b.dim for b in prog.blocks],
        },
        "first_step_rows": index["first_step_rows"],
    }
    actual_sum = initial_sum(spec)
    if index["mode"] == "reference" and (actual_sum is None or abs(actual_sum - 1.0) > 1e-9):
        diagnostics["reference_gap"] = (
            "initial beliefs are off the unit slice; the first update step is "
            "not covered by this certificate"
        )
    if sol.status is not SolveStatus.FEASIBLE:
        _attach_falsifier(diagnostics, model, spec, falsify_depth)
        return VerificationOutcome(
            status="unknown", gamma=spec.lam, method=method, certificate=None,
            diagnostics=diagnostics, wall_time=time.monotonic() - start,
        )
    cert_sos = builder.extract_certificate(sol)
    mismatches = builder.check_certificate(cert_sos, sol.x)
    if mismatches:
        diagnostics["extraction"] = mismatches
        return VerificationOutcome(
            status="unknown", gamma=spec.lam, method=method, certificate=None,
            diagnostics=diagnostics, wall_time=time.monotonic() - start,
        )
    barriers = [cert_sos.polynomials[name] for name in index["barrier_names"]]
    certificate = PolynomialCertificate(
        barriers=barriers,
        sos=cert_sos,
        localize=index["mode"],
        slice_sum=index["slice_sum"],
        degree=degree,
    )
    if index["time_polynomial"]:
        diagnostics["time_polynomial"] = True
    outcome = VerificationOutcome(
        status="certified", gamma=spec.lam, method=method, certificate=certificate,
        diagnostics=diagnostics, wall_time=time.monotonic() - start,
    )
    if validate:
        report = validate_certificate(model, spec, outcome,
                                      n_samples=validation_samples, seed=seed)
        diagnostics["validation"] = report.to_json_obj()
        if not report.passed:
            outcome.status = "unknown"
            outcome.certificate = None
    outcome.wall_time = time.monotonic() - start
    return outcome


def verify_pomdp_infinite(
    model: Model,
    spec: PrivacySpec,
    degree: int = 2,
    localize: str = "auto",
    multiplier_degree: Optional[int] = None,
    cover_initial_step: bool = True,
    tol: float = 1e-7,
    validate: bool = True,
    validation_samples: int = 2000,
    falsify_depth: Optional[int] = 6,
    dump_sdp: Optional[str] = None,
    seed: int = 0,
) -> VerificationOutcome:
    """All-time POMDP certificate with a single time-invariant barrier."""
    return _verify_pomdp(
        model, spec, degree, None, localize, multiplier_degree,
        cover_initial_step, False, tol, validate, validation_samples,
        falsify_depth, dump_sdp, seed,
    )


def verify_pomdp_finite(
    model: Model,
    spec: PrivacySpec,
    horizon: Optional[int] = None,
    degree: int = 2,
    localize: str = "auto",
    multiplier_degree: Optional[int] = None,
    cover_initial_step: bool = True,
    time_polynomial: bool = False,
    tol: float = 1e-7,
    validate: bool = True,
    validation_samples: int = 2000,
    falsify_depth: Optional[int] = 6,
    dump_sdp: Optional[str] = None,
    seed: int = 0,
) -> VerificationOutcome:
    """Horizon-T POMDP certificate.

    By default the barrier is one polynomial per step, matching the stepwise
    decrease quantifier; time_polynomial=True switches to a single
    polynomial in (t, b) with the decrease asserted jointly over real t.
    """
    T = horizon if horizon is not None else spec.horizon
    if T is None or T < 1:
        raise ValueError("finite-horizon verification needs a horizon T >= 1")
    return _verify_pomdp(
        model, spec, degree, T, localize, multiplier_degree,
        cover_initial_step, time_polynomial, tol, validate,
        validation_samples, falsify_depth, dump_sdp, seed,
    )


# --- a posteriori validation ------------------------------------------------------


@dataclass
class CertificateValidation:
    unsafe_samples: int
    unsafe_min_barrier: Optional[float]
    initial_samples: int
    initial_max_barrier: Optional[float]
    decrease_samples: int
    decrease_max_delta: Optional[float]
    violations: list[str]

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json_obj(self) -> dict:
        return dataclasses.asdict(self)


def validate_certificate(
    model: Model,
    spec: PrivacySpec,
    outcome: VerificationOutcome,
    n_samples: int = 10_000,
    seed: int = 0,
    decrease_tol: float = DECREASE_TOL,
) -> CertificateValidation:
    """Sample-based audit of a certified outcome.

    Draws beliefs from the certificate's declared domain (the invariant sum
    slice for MDP certificates, the unit simplex plus the initial points for
    POMDP certificates), checking barrier positivity on the unsafe part,
    negativity on the initial set, and nonincrease along sampled
    transitions.
    """
    if not outcome.certified or outcome.certificate is None:
        raise ValueError("only certified outcomes carry a certificate to validate")
    cert = outcome.certificate
    rng = np.random.default_rng(seed)
    n = model.n_states
    hs = unsafe_halfspace(spec, model)
    violations: list[str] = []

    finite = isinstance(cert, PolynomialCertificate) and outcome.method.horizon is not None

    if isinstance(cert, MatrixCertificate):
        def barrier_first(b):
            return cert.barrier(b)

        def barrier_last(b):
            return cert.barrier(b)

        def barrier_pair(bprev, bnext, t):
            return cert.barrier(bprev), cert.barrier(bnext)

        slice_sum = cert.slice_sum if cert.slice_sum is not None else 1.0
        domain_scales = [slice_sum]
    else:
        def barrier_first(b):
            return cert.barriers[0].eval(list(b))

        def barrier_last(b):
            return cert.barriers[-1].eval(list(b))

        def barrier_pair(bprev, bnext, t):
            if not finite:
                p = cert.barriers[0]
                return p.eval(list(bprev)), p.eval(list(bnext))
            t = min(max(t, 1), len(cert.barriers) - 1)
            return cert.barriers[t - 1].eval(list(bprev)), cert.barriers[t].eval(list(bnext))

        domain_scales = [1.0]

    # Unsafe positivity for the barrier that guards the unsafe set.
    unsafe_count = 0
    unsafe_min = None
    budget = n_samples
    for scale in domain_scales:
        if hs.lam >= scale:
            continue  # unsafe region is empty on this slice
        draws = rng.dirichlet(np.ones(n), size=budget) * scale
        mask = draws @ hs.w > hs.lam
        pts = draws[mask]
        for b in pts:
            val = barrier_last(b)
            unsafe_min = val if unsafe_min is None else min(unsafe_min, val)
            if val <= 0:
                violations.append(
                    f"barrier nonpositive ({val:.3e}) at unsafe belief {b.round(6).tolist()}"
                )
                break
        unsafe_count += len(pts)

    # Initial negativity.
    init_pts: list[np.ndarray] = []
    init = spec.initial_set
    if isinstance(init, PointBelief):
        init_pts = [np.array(init.values)]
    elif isinstance(init, BeliefPolytope):
        verts = init.vertices()
        init_pts = [np.asarray(v) for v in verts]
        if verts:
            vmat = np.array(verts)
            for _ in range(min(n_samples // 10, 256)):
                init_pts.append(rng.dirichlet(np.ones(len(verts))) @ vmat)
    else:
        draws = rng.dirichlet(np.ones(n), size=n_samples)
        init_pts = [b for b in draws if init.contains(b)][:256]
    init_max = None
    for b in init_pts:
        val = barrier_first(b)
        init_max = val if init_max is None else max(init_max, val)
        if val >= 0:
            violations.append(
                f"barrier nonnegative ({val:.3e}) at initial belief {np.round(b, 6).tolist()}"
            )
            break

    # Decrease along sampled transitions from the certificate domain. A
    # reference-mode certificate only claims decrease on the unit slice, so
    # off-slice initial points are excluded from its audit (the uncovered
    # first step is reported by the verifier as reference_gap).
    decrease_count = 0
    decrease_max = None
    steps = n_samples
    horizon = outcome.method.horizon
    if model.is_pomdp:
        maps = branch_maps(model)
        reference_mode = getattr(cert, "localize", None) == "reference"
        starts = init_pts
        if reference_mode:
            starts = [b for b in init_pts if abs(float(np.sum(b)) - 1.0) <= 1e-9]
        start_points = starts + [
            rng.dirichlet(np.ones(n)) for _ in range(max(steps // 4, 1))
        ]
        for b in start_points:
            if decrease_count >= steps:
                break
            t_step = 1
            for (a, z), rmap in maps.items():
                r0 = rmap.denominator.eval(list(b))
                if r0 <= FIRST_STEP_PROB_TOL:
                    continue
                nxt = np.array(rmap.eval(list(b)))
                prev_val, next_val = barrier_pair(b, nxt, t_step)
                delta = next_val - prev_val
                decrease_max = delta if decrease_max is None else max(decrease_max, delta)
                decrease_count += 1
                if delta > decrease_tol:
                    violations.append(
                        f"barrier increased by {delta:.3e} on branch ({a}, {z}) "
                        f"from {np.round(b, 6).tolist()}"
                    )
                    break
            else:
                continue
            break
        # Also audit deeper steps along simplex beliefs for finite horizons.
        if finite and not violations:
            for t_step in range(2, (horizon or 1) + 1):
                for _ in range(max(steps // (4 * (horizon or 1)), 1)):
                    b = rng.dirichlet(np.ones(n))
                    for (a, z), rmap in maps.items():
                        r0 = rmap.denominator.eval(list(b))
                        if r0 <= FIRST_STEP_PROB_TOL:
                            continue
                        nxt = np.array(rmap.eval(list(b)))
                        pv, nv = barrier_pair(b, nxt, t_step)
                        delta = nv - pv
                        decrease_max = delta if decrease_max is None else max(decrease_max, delta)
                        decrease_count += 1
                        if delta > decrease_tol:
                            violations.append(
                                f"barrier increased by {delta:.3e} at step {t_step}"
                            )
                            break
                    if violations:
                        break
                if violations:
                    break
    else:
        scale = domain_scales[0]
        draws = rng.dirichlet(np.ones(n), size=steps) * scale
        for b in draws:
            a = model.actions[rng.integers(len(model.actions))]
            nxt = model.transition(a) @ b
            pv, nv = barrier_pair(b, nxt, 1)
            delta = nv - pv
            decrease_max = delta if decrease_max is None else max(decrease_max, delta)
            decrease_count += 1
            if delta > decrease_tol:
                violations.append(
                    f"barrier increased by {delta:.3e} under action {a} "
                    f"from {np.round(b, 6).tolist()}"
                )
                break

    return CertificateValidation(
        unsafe_samples=unsafe_count,
        unsafe_min_barrier=unsafe_min,
        initial_samples=len(init_pts),
        initial_max_barrier=init_max,
        decrease_samples=decrease_count,
        decrease_max_delta=decrease_max,
        violations=violations,
    )


# --- threshold search --------------------------------------------------------------


@dataclass
class BoundResult:
    gamma_star: Optional[float]
    outcome: Optional[VerificationOutcome]
    falsifier_bound: float
    trace: list[dict]
    wall_time: float

    def to_json_obj(self) -> dict:
        return {
            "gamma_star": self.gamma_star,
            "falsifier_bound": self.falsifier_bound,
            "outcome": None if self.outcome is None else self.outcome.to_json_obj(),
            "trace": self.trace,
            "wall_time": self.wall_time,
        }


def _verify_at(model, spec, method: Method, gamma: float, **kwargs) -> VerificationOutcome:
    probe = dataclasses.replace(spec, lam=gamma)
    if method.kind == "mdp-sdp":
        return verify_mdp(model, probe, **kwargs)
    if method.kind == "pomdp-infinite-sos":
        return verify_pomdp_infinite(model, probe, degree=method.degree, **kwargs)
    if method.kind == "pomdp-finite-sos":
        return verify_pomdp_finite(
            model, probe, horizon=method.horizon, degree=method.degree, **kwargs
        )
    raise ValueError(f"unknown method {method.kind!r}")


def min_certified_gamma(
    model: Model,
    spec: PrivacySpec,
    method: Method,
    tol: float = 0.01,
    falsify_depth: Optional[int] = None,
    bracket_lo: Optional[float] = None,
    **verify_kwargs,
) -> BoundResult:
    """Bisect for the smallest threshold the chosen method can certify.

    The bracket starts at the falsifier's lower bound (no smaller threshold
    can be sound) and keeps the invariant that the upper endpoint is
    certified and the lower is not. Certifiability is monotone in the
    threshold: raising it strictly shrinks the unsafe set.
    """
    start = time.monotonic()
    if falsify_depth is None:
        falsify_depth = 8 if model.is_pomdp else 12
    probe = dataclasses.replace(spec, lam=1.0)
    _, fal_bound = falsify(model, probe, depth=falsify_depth)
    trace: list[dict] = []

    verify_kwargs.setdefault("falsify_depth", None)

    def attempt(g: float) -> VerificationOutcome:
        out = _verify_at(model, spec, method, g, **verify_kwargs)
        trace.append(
            {
                "gamma": g,
                "status": out.status,
                "solver": _jsonable(out.diagnostics.get("solver", {})),
                "wall_time": out.wall_time,
            }
        )
        return out

    lo = bracket_lo if bracket_lo is not None else max(fal_bound + tol, 0.0)
    lo = min(lo, 1.0)
    hi = 1.0

    out_lo = attempt(lo)
    if out_lo.certified:
        return BoundResult(
            gamma_star=lo, outcome=out_lo, falsifier_bound=fal_bound,
            trace=trace, wall_time=time.monotonic() - start,
        )
    out_hi = attempt(hi)
    if not out_hi.certified:
        return BoundResult(
            gamma_star=None, outcome=None, falsifier_bound=fal_bound,
            trace=trace, wall_time=time.monotonic() - start,
        )
    best = out_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        out_mid = attempt(mid)
        if out_mid.certified:
            hi = mid
            best = out_mid
        else:
            lo = mid
    return BoundResult(
        gamma_star=hi, outcome=best, falsifier_bound=fal_bound,
        trace=trace, wall_time=time.monotonic() - start,
    )


@dataclass
class SweepRow:
    degree: int
    gamma_star: Optional[float]
    wall_time: float
    error: Optional[str] = None

    def to_json_obj(self) -> dict:
        return dataclasses.asdict(self)


def degree_sweep(
    model: Model,
    spec: PrivacySpec,
    degrees: Sequence[int],
    horizon: Optional[int] = None,
    tol: float = 0.01,
    jobs: int = 1,
    falsify_depth: Optional[int] = None,
    **verify_kwargs,
) -> list[SweepRow]:
    """Tightest certified threshold per certificate degree.

    Rows are returned in the input order; failures are recorded per row and
    the sweep continues.
    """
    if list(degrees) != sorted(degrees) or any(d % 2 for d in degrees):
        raise ValueError("degrees must be even and ascending")

    def run(d: int) -> SweepRow:
        t0 = time.monotonic()
        try:
            method = Method(
                kind="pomdp-finite-sos" if horizon is not None else "pomdp-infinite-sos",
                degree=d,
                horizon=horizon,
            )
            res = min_certified_gamma(
                model, spec, method, tol=tol, falsify_depth=falsify_depth,
                **verify_kwargs,
            )
            return SweepRow(degree=d, gamma_star=res.gamma_star,
                            wall_time=time.monotonic() - t0)
        except Exception as err:
            return SweepRow(degree=d, gamma_star=None,
                            wall_time=time.monotonic() - t0, error=str(err))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, degrees))
    return [run(d) for d in degrees]
