"""Sum-of-squares program compiler.

Builds semidefinite programs from polynomial positivity constraints: an SOS
constraint p(x) in Sigma becomes a Gram matrix Q >= 0 whose entries are
scalar decision variables tied to p's coefficients by linear equalities
(p = z' Q z on the monomial basis z). Constrained positivity over a
semialgebraic set goes through the usual certificate shape

    f  =  sum_i r_i a_i  +  sum_j s_j g_j  +  s_0,

with free polynomial multipliers r_i for equalities a_i = 0, SOS
multipliers s_j for inequalities g_j >= 0, and an SOS remainder s_0.

Gram bases are pruned to the degree band supported by the constrained
polynomial (a graded relaxation of the Newton-polytope bound: any square
decomposition of p lives inside half of p's support hull). Pruning can be
disabled for debugging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .conic import ConicProgram, ConicSolution, LmiBlock
from .poly import Monomial, Polynomial, grlex_key, monomial_basis, monomial_mul

GRAM_EIG_CLIP = -1e-8
GRAM_LIFT_TOL = 1e-6
CERT_COEFF_TOL = 1e-6


class OddLeadingTermError(ValueError):
    """A fixed odd-degree leading term can never be a sum of squares."""


class CertificateExtractionError(RuntimeError):
    """Gram eigenvalue below the clip threshold during extraction."""

    def __init__(self, message: str, eigenvalue: float):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class LinExpr:
    """Affine function of scalar decision variables."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs: Optional[Mapping[int, float]] = None, const: float = 0.0):
        self.coeffs = {i: float(c) for i, c in (coeffs or {}).items() if c != 0.0}
        self.const = float(const)

    def is_constant(self) -> bool:
        return not self.coeffs

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return LinExpr(self.coeffs, self.const + other)
        coeffs = dict(self.coeffs)
        for i, c in other.coeffs.items():
            coeffs[i] = coeffs.get(i, 0.0) + c
        return LinExpr(coeffs, self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return LinExpr({i: -c for i, c in self.coeffs.items()}, -self.const)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return LinExpr(self.coeffs, self.const - other)
        return self + (-other)

    def scale(self, c: float) -> "LinExpr":
        return LinExpr({i: c * v for i, v in self.coeffs.items()}, c * self.const)

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(c * x[i] for i, c in self.coeffs.items())


class PolyExpression:
    """Polynomial whose coefficients are affine in the decision variables."""

    __slots__ = ("n_vars", "terms")

    def __init__(self, n_vars: int, terms: Optional[dict[Monomial, LinExpr]] = None):
        self.n_vars = n_vars
        self.terms = dict(terms or {})

    @classmethod
    def from_polynomial(cls, p: Polynomial) -> "PolyExpression":
        return cls(p.n_vars, {m: LinExpr(const=c) for m, c in p.terms.items()})

    @classmethod
    def constant(cls, value: LinExpr | float, n_vars: int) -> "PolyExpression":
        lin = value if isinstance(value, LinExpr) else LinExpr(const=value)
        return cls(n_vars, {(0,) * n_vars: lin})

    def _merge(self, m: Monomial, lin: LinExpr) -> None:
        if m in self.terms:
            self.terms[m] = self.terms[m] + lin
        else:
            self.terms[m] = lin

    def __add__(self, other):
        if isinstance(other, Polynomial):
            other = PolyExpression.from_polynomial(other)
        if isinstance(other, (int, float)):
            other = PolyExpression.constant(float(other), self.n_vars)
        if self.n_vars != other.n_vars:
            raise ValueError("arity mismatch")
        out = PolyExpression(self.n_vars, dict(self.terms))
        for m, lin in other.terms.items():
            out._merge(m, lin)
        return out

    def __neg__(self):
        return PolyExpression(self.n_vars, {m: -lin for m, lin in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (Polynomial, int, float)):
            return self + (
                -other
                if isinstance(other, (int, float))
                else PolyExpression.from_polynomial(-other)
            )
        return self + (-other)

    def scale(self, c: float) -> "PolyExpression":
        return PolyExpression(self.n_vars, {m: lin.scale(c) for m, lin in self.terms.items()})

    def mul_poly(self, p: Polynomial) -> "PolyExpression":
        """Multiply by a fixed polynomial (keeps affine-in-variables shape)."""
        if p.n_vars != self.n_vars:
            raise ValueError("arity mismatch")
        out = PolyExpression(self.n_vars)
        for m1, lin in self.terms.items():
            for m2, c in p.terms.items():
                out._merge(monomial_mul(m1, m2), lin.scale(c))
        return out

    def support(self) -> list[Monomial]:
        live = [
            m
            for m, lin in self.terms.items()
            if lin.coeffs or abs(lin.const) > 1e-14
        ]
        return sorted(live, key=grlex_key)

    def eliminate_last_var(self, replacement: Polynomial) -> "PolyExpression":
        """Substitute the last variable by a polynomial in the remaining ones.

        Restricting conditions to an affine slice this way is equivalent to
        carrying a free slice multiplier, but the resulting programs are one
        variable smaller.
        """
        n_out = self.n_vars - 1
        if replacement.n_vars != n_out:
            raise ValueError("replacement arity must be n_vars - 1")
        pow_cache: dict[int, Polynomial] = {0: Polynomial.constant(1.0, n_out)}

        def rep_power(e: int) -> Polynomial:
            if e not in pow_cache:
                pow_cache[e] = rep_power(e - 1) * replacement
            return pow_cache[e]

        out = PolyExpression(n_out)
        for m, lin in self.terms.items():
            head = m[:n_out]
            tail = m[n_out]
            for mono, c in rep_power(tail).terms.items():
                combined = tuple(a + b for a, b in zip(head, mono))
                out._merge(combined, lin.scale(c))
        return out

    def degree_range(self) -> tuple[int, int]:
        sup = self.support()
        if not sup:
            return (0, 0)
        degs = [sum(m) for m in sup]
        return (min(degs), max(degs))

    def value(self, x: np.ndarray) -> Polynomial:
        return Polynomial(
            self.n_vars, {m: lin.value(x) for m, lin in self.terms.items()}
        )


@dataclass
class SosVariable:
    """Handle to a Gram-parameterized SOS polynomial z' Q z."""

    name: str
    basis: list[Monomial]
    var_indices: list[tuple[int, int, int]]  # (flat var, row, col) for col >= row
    block_index: int

    @property
    def gram_dim(self) -> int:
        return len(self.basis)

    def gram_value(self, x: np.ndarray) -> np.ndarray:
        Q = np.zeros((self.gram_dim, self.gram_dim))
        for v, i, j in self.var_indices:
            Q[i, j] = x[v]
            Q[j, i] = x[v]
        return Q


@dataclass
class GramFactor:
    basis: list[Monomial]
    gram: np.ndarray
    factor: np.ndarray  # Q ~= factor' factor

    def squares(self, n_vars: int) -> list[Polynomial]:
        polys = []
        for row in self.factor:
            terms = {m: c for m, c in zip(self.basis, row)}
            polys.append(Polynomial(n_vars, terms))
        return polys

    def reconstruct(self, n_vars: int) -> Polynomial:
        out = Polynomial.zero(n_vars)
        for i, mi in enumerate(self.basis):
            for j, mj in enumerate(self.basis):
                c = self.gram[i, j]
                if abs(c) > 1e-16:
                    out = out + Polynomial(n_vars, {monomial_mul(mi, mj): c})
        return out


@dataclass
class SosCertificate:
    """Numeric certificate extracted from a solved SOS program."""

    polynomials: dict[str, Polynomial]
    scalars: dict[str, float]
    gram_factors: dict[str, GramFactor]
    margin: float

    def to_json_obj(self) -> dict:
        return {
            "polynomials": {k: p.to_json_obj() for k, p in self.polynomials.items()},
            "scalars": self.scalars,
            "gram_factors": {
                k: {
                    "basis": [list(m) for m in g.basis],
                    "gram": g.gram.tolist(),
                    "factor": g.factor.tolist(),
                }
                for k, g in self.gram_factors.items()
            },
            "margin": self.margin,
        }


class SosProgram:
    """Builder translating SOS constraints into a ConicProgram."""

    def __init__(self, prune_basis: bool = True):
        self.prune_basis = prune_basis
        self.n_vars = 0
        self.var_names: list[str] = []
        self.blocks: list[LmiBlock] = []
        self.eq_rows: list[dict[int, float]] = []
        self.eq_consts: list[float] = []
        self.ineq_rows: list[dict[int, float]] = []
        self.ineq_consts: list[float] = []
        self.ineq_strict: list[bool] = []
        self.sos_vars: dict[str, SosVariable] = {}
        self.constraints: dict[str, tuple[PolyExpression, SosVariable]] = {}
        self.tracked_exprs: dict[str, PolyExpression] = {}
        self.tracked_scalars: dict[str, LinExpr] = {}

    # -- variables -------------------------------------------------------
    def _new_var(self, name: str) -> int:
        idx = self.n_vars
        self.n_vars += 1
        self.var_names.append(name)
        return idx

    def scalar_var(self, name: str, lower: Optional[float] = None,
                   strict: bool = False, track: bool = True) -> LinExpr:
        idx = self._new_var(name)
        expr = LinExpr({idx: 1.0})
        if lower is not None:
            self.ineq_rows.append({idx: 1.0})
            self.ineq_consts.append(lower)
            self.ineq_strict.append(strict)
        if track:
            self.tracked_scalars[name] = expr
        return expr

    def free_poly(self, n_vars: int, degree: int, name: str,
                  track: bool = True) -> PolyExpression:
        """Polynomial with one free coefficient per monomial of degree <= degree."""
        terms = {}
        for m in monomial_basis(n_vars, degree):
            idx = self._new_var(f"{name}[{','.join(map(str, m))}]")
            terms[m] = LinExpr({idx: 1.0})
        expr = PolyExpression(n_vars, terms)
        if track:
            self.tracked_exprs[name] = expr
        return expr

    def new_sos_var(self, n_vars: int, degree: int, name: str,
                    basis: Optional[list[Monomial]] = None) -> tuple[SosVariable, PolyExpression]:
        """Fresh SOS polynomial of the given even degree: p = z' Q z, Q >= 0.

        The Gram block has side C(n_vars + degree/2, degree/2) unless an
        explicit basis is supplied.
        """
        if degree % 2:
            raise ValueError("SOS polynomial degree must be even")
        if basis is None:
            basis = monomial_basis(n_vars, degree // 2)
        return self._make_gram(n_vars, basis, name)

    def _make_gram(self, n_vars: int, basis: list[Monomial],
                   name: str) -> tuple[SosVariable, PolyExpression]:
        if name in self.sos_vars:
            raise ValueError(f"duplicate SOS variable name {name!r}")
        s = len(basis)
        var_indices = []
        coeffs: dict[int, np.ndarray] = {}
        expr = PolyExpression(n_vars)
        for i in range(s):
            for j in range(i, s):
                idx = self._new_var(f"{name}.Q[{i},{j}]")
                var_indices.append((idx, i, j))
                E = np.zeros((s, s))
                E[i, j] = 1.0
                E[j, i] = 1.0
                coeffs[idx] = E
                weight = 1.0 if i == j else 2.0
                expr._merge(monomial_mul(basis[i], basis[j]), LinExpr({idx: weight}))
        block = LmiBlock(dim=s, F0=np.zeros((s, s)), coeffs=coeffs, strict=False,
                         name=name)
        self.blocks.append(block)
        var = SosVariable(name=name, basis=list(basis), var_indices=var_indices,
                          block_index=len(self.blocks) - 1)
        self.sos_vars[name] = var
        return var, expr

    # -- constraints -------------------------------------------------------
    def assert_zero(self, expr: PolyExpression) -> None:
        for m, lin in expr.terms.items():
            if lin.is_constant():
                if abs(lin.const) > 1e-12:
                    raise ValueError(
                        f"coefficient of {m} is the nonzero constant {lin.const}"
                    )
                continue
            self.eq_rows.append(dict(lin.coeffs))
            self.eq_consts.append(-lin.const)

    def assert_sos(self, expr: PolyExpression, name: str,
                   basis: Optional[list[Monomial]] = None) -> SosVariable:
        """Constrain expr to be a sum of squares.

        Introduces a Gram variable G on a degree-band basis and matches
        coefficients: expr - z' G z = 0. Monomials of expr outside the
        products of the basis are forced to vanish; a fixed nonzero
        odd-degree leading coefficient is rejected outright.
        """
        dmin, dmax = expr.degree_range()
        if dmax % 2:
            top_fixed = [
                (m, lin)
                for m, lin in expr.terms.items()
                if sum(m) == dmax and lin.is_constant() and abs(lin.const) > 1e-14
            ]
            if top_fixed and not any(
                lin.coeffs for m, lin in expr.terms.items() if sum(m) == dmax
            ):
                raise OddLeadingTermError(
                    f"{name}: fixed leading term of odd degree {dmax} cannot be SOS"
                )
        if basis is None:
            if self.prune_basis:
                kmin = (dmin + 1) // 2
                kmax = dmax // 2
            else:
                kmin = 0
                kmax = (dmax + 1) // 2
            basis = monomial_basis(expr.n_vars, max(kmax, 0), min_degree=min(kmin, max(kmax, 0)))
        gram_var, gram_expr = self._make_gram(expr.n_vars, basis, name)
        self.assert_zero(expr - gram_expr)
        self.constraints[name] = (expr, gram_var)
        return gram_var

    def assert_positive_on_set(
        self,
        f: PolyExpression,
        name: str,
        inequalities: Sequence[Polynomial] = (),
        equalities: Sequence[Polynomial] = (),
        multiplier_degree: Optional[int] = None,
        margin: LinExpr | float = 0.0,
    ) -> dict[str, object]:
        """Certify f >= margin on {a_i = 0, g_j >= 0}.

        Free multipliers r_i handle equalities, SOS multipliers s_j the
        inequalities, and the remainder f - sum r_i a_i - sum s_j g_j - margin
        must be SOS. The default multiplier degree is deg(f) rounded up to
        even; per-call overrides keep product degrees under control.
        """
        _, fdeg = f.degree_range()
        if multiplier_degree is None:
            multiplier_degree = fdeg + (fdeg % 2)
        if multiplier_degree % 2:
            raise ValueError("multiplier_degree must be even for SOS multipliers")
        handles: dict[str, object] = {}
        expr = f - PolyExpression.constant(
            margin if isinstance(margin, LinExpr) else float(margin), f.n_vars
        )
        for k, a in enumerate(equalities):
            r = self.free_poly(a.n_vars, max(multiplier_degree - 1, 0),
                               f"{name}.r{k}", track=False)
            handles[f"r{k}"] = r
            expr = expr - r.mul_poly(a)
        for k, g in enumerate(inequalities, start=1):
            s_var, s_expr = self.new_sos_var(g.n_vars, multiplier_degree, f"{name}.s{k}")
            handles[f"s{k}"] = s_var
            expr = expr - s_expr.mul_poly(g)
        handles["residual"] = self.assert_sos(expr, f"{name}.s0")
        return handles

    # -- compile and extract -------------------------------------------------
    def compile(self) -> ConicProgram:
        eq_A = None
        eq_c = None
        if self.eq_rows:
            eq_A = np.zeros((len(self.eq_rows), self.n_vars))
            for r, row in enumerate(self.eq_rows):
                for i, c in row.items():
                    eq_A[r, i] = c
            eq_c = np.array(self.eq_consts)
        ineq_G = None
        ineq_h = None
        ineq_strict = None
        if self.ineq_rows:
            ineq_G = np.zeros((len(self.ineq_rows), self.n_vars))
            for r, row in enumerate(self.ineq_rows):
                for i, c in row.items():
                    ineq_G[r, i] = c
            ineq_h = np.array(self.ineq_consts)
            ineq_strict = np.array(self.ineq_strict, dtype=bool)
        prog = ConicProgram(
            n_vars=self.n_vars,
            blocks=list(self.blocks),
            eq_A=eq_A,
            eq_c=eq_c,
            ineq_G=ineq_G,
            ineq_h=ineq_h,
            ineq_strict=ineq_strict,
            var_names=list(self.var_names),
        )
        prog.validate()
        return prog

    def extract_certificate(self, solution: ConicSolution) -> SosCertificate:
        """Substitute solved values into the tracked expressions.

        Gram matrices are factored through an eigendecomposition; eigenvalues
        in [-1e-8, 0) are clipped to zero and anything lower aborts the
        extraction.
        """
        if solution.x is None:
            raise ValueError("solution carries no point")
        x = np.asarray(solution.x, dtype=float)
        polynomials = {k: e.value(x) for k, e in self.tracked_exprs.items()}
        scalars = {k: e.value(x) for k, e in self.tracked_scalars.items()}
        gram_factors = {}
        for name, var in self.sos_vars.items():
            Q = var.gram_value(x)
            lam, U = np.linalg.eigh(Q)
            if lam.size and lam[0] < GRAM_EIG_CLIP:
                # Solver tolerance lets boundary Grams dip slightly negative.
                # A diagonal lift inside the certificate's coefficient budget
                # restores exact PSD-ness; anything larger is a real failure.
                if lam[0] < -GRAM_LIFT_TOL:
                    raise CertificateExtractionError(
                        f"Gram block {name!r} has eigenvalue {lam[0]:.3e} below "
                        "the clip threshold",
                        eigenvalue=float(lam[0]),
                    )
                Q = Q + (-lam[0]) * np.eye(Q.shape[0])
                lam = lam - lam[0]
            lam = np.clip(lam, 0.0, None)
            factor = (np.sqrt(lam)[:, None] * U.T)
            gram_factors[name] = GramFactor(basis=var.basis, gram=Q, factor=factor)
        return SosCertificate(
            polynomials=polynomials,
            scalars=scalars,
            gram_factors=gram_factors,
            margin=solution.margin,
        )

    def check_certificate(self, cert: SosCertificate, x: np.ndarray,
                          tol: float = CERT_COEFF_TOL) -> list[str]:
        """Round-trip check: each Gram reconstruction matches its constraint."""
        problems = []
        for name, (expr, var) in self.constraints.items():
            target = expr.value(x)
            g = cert.gram_factors[var.name]
            rebuilt = g.reconstruct(expr.n_vars)
            err = target.max_coeff_delta(rebuilt)
            if err > tol:
                problems.append(f"{name}: coefficient mismatch {err:.3e}")
        return problems
