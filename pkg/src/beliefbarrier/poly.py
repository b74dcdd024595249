"""Sparse multivariate polynomial arithmetic.

Polynomials are stored as a mapping from exponent tuples to float
coefficients. This is the substrate for barrier certificates and for the
Gram-matrix encoding of sum-of-squares constraints, so the operations here
are deliberately small and exact: add / multiply / scale / evaluate,
graded-lex monomial enumeration, and composition with rational maps via
denominator clearing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

COEFF_PRUNE_TOL = 1e-14

Monomial = tuple[int, ...]


def monomial_degree(m: Monomial) -> int:
    return sum(m)


def monomial_mul(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


def grlex_key(m: Monomial):
    """Sort key for graded lexicographic order with x1 > x2 > ... > xn."""
    return (sum(m), tuple(-e for e in m))


def monomial_basis(n_vars: int, max_degree: int, min_degree: int = 0) -> list[Monomial]:
    """All exponent tuples with min_degree <= total degree <= max_degree,
    in graded-lex order. Count for min_degree=0 is C(n_vars + d, d)."""
    if n_vars < 1:
        raise ValueError("n_vars must be >= 1")
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    out: list[Monomial] = []

    def rec(prefix: list[int], remaining: int, budget: int) -> None:
        if remaining == 1:
            for e in range(budget + 1):
                out.append(tuple(prefix + [e]))
            return
        for e in range(budget + 1):
            rec(prefix + [e], remaining - 1, budget - e)

    rec([], n_vars, max_degree)
    out = [m for m in out if sum(m) >= min_degree]
    out.sort(key=grlex_key)
    return out


class Polynomial:
    """Immutable sparse polynomial with float coefficients.

    Terms with |coefficient| <= 1e-14 are dropped on construction, so a
    polynomial is zero iff it has no terms.
    """

    __slots__ = ("n_vars", "terms")

    def __init__(self, n_vars: int, terms: Mapping[Monomial, float] | None = None):
        if n_vars < 1:
            raise ValueError("n_vars must be >= 1")
        clean: dict[Monomial, float] = {}
        for m, c in (terms or {}).items():
            if len(m) != n_vars:
                raise ValueError(f"monomial {m} has arity {len(m)}, expected {n_vars}")
            c = float(c)
            if abs(c) > COEFF_PRUNE_TOL:
                clean[tuple(int(e) for e in m)] = c
        object.__setattr__(self, "n_vars", n_vars)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, *args):  # pragma: no cover - immutability guard
        raise AttributeError("Polynomial is immutable")

    # -- constructors ---------------------------------------------------
    @classmethod
    def zero(cls, n_vars: int) -> "Polynomial":
        return cls(n_vars, {})

    @classmethod
    def constant(cls, c: float, n_vars: int) -> "Polynomial":
        return cls(n_vars, {(0,) * n_vars: c})

    @classmethod
    def variable(cls, index: int, n_vars: int) -> "Polynomial":
        if not 0 <= index < n_vars:
            raise ValueError("variable index out of range")
        e = [0] * n_vars
        e[index] = 1
        return cls(n_vars, {tuple(e): 1.0})

    @classmethod
    def from_coeffs(cls, n_vars: int, coeffs: Mapping[Monomial, float]) -> "Polynomial":
        return cls(n_vars, coeffs)

    # -- basic queries ---------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree; 0 for the zero polynomial."""
        if not self.terms:
            return 0
        return max(sum(m) for m in self.terms)

    def min_degree(self) -> int:
        if not self.terms:
            return 0
        return min(sum(m) for m in self.terms)

    def coeff(self, m: Monomial) -> float:
        return self.terms.get(tuple(m), 0.0)

    def support(self) -> list[Monomial]:
        return sorted(self.terms, key=grlex_key)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Polynomial)
            and self.n_vars == other.n_vars
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.n_vars, frozenset(self.terms.items())))

    def almost_equal(self, other: "Polynomial", tol: float = 1e-12) -> bool:
        if self.n_vars != other.n_vars:
            return False
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.coeff(m) - other.coeff(m)) <= tol for m in keys)

    def max_coeff_delta(self, other: "Polynomial") -> float:
        keys = set(self.terms) | set(other.terms)
        if not keys:
            return 0.0
        return max(abs(self.coeff(m) - other.coeff(m)) for m in keys)

    # -- arithmetic --------------------------------------------------------
    def _check_arity(self, other: "Polynomial") -> None:
        if self.n_vars != other.n_vars:
            raise ValueError(
                f"arity mismatch: {self.n_vars} vs {other.n_vars} variables"
            )

    def __add__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            other = Polynomial.constant(other, self.n_vars)
        self._check_arity(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = terms.get(m, 0.0) + c
        return Polynomial(self.n_vars, terms)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.n_vars, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            other = Polynomial.constant(other, self.n_vars)
        return self + (-other)

    def __rsub__(self, other) -> "Polynomial":
        return (-self) + other

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            return self.scale(float(other))
        self._check_arity(other)
        terms: dict[Monomial, float] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = monomial_mul(m1, m2)
                terms[m] = terms.get(m, 0.0) + c1 * c2
        return Polynomial(self.n_vars, terms)

    __rmul__ = __mul__

    def scale(self, c: float) -> "Polynomial":
        return Polynomial(self.n_vars, {m: c * v for m, v in self.terms.items()})

    def __pow__(self, k: int) -> "Polynomial":
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = Polynomial.constant(1.0, self.n_vars)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    def eval(self, point: Sequence[float]) -> float:
        """Evaluate with compensated (Kahan) accumulation over terms."""
        if len(point) != self.n_vars:
            raise ValueError("point arity mismatch")
        total = 0.0
        comp = 0.0
        for m, c in self.terms.items():
            v = c
            for x, e in zip(point, m):
                if e:
                    v *= x**e
            y = v - comp
            t = total + y
            comp = (t - total) - y
            total = t
        return total

    def substitute(self, replacements: Mapping[int, "Polynomial"]) -> "Polynomial":
        """Substitute polynomials for variables (same arity as the result)."""
        if not replacements:
            return self
        n = next(iter(replacements.values())).n_vars
        subs = {}
        for i in range(self.n_vars):
            subs[i] = replacements.get(i, Polynomial.variable(i, n))
        result = Polynomial.zero(n)
        pow_cache: dict[tuple[int, int], Polynomial] = {}

        def power(i: int, e: int) -> Polynomial:
            key = (i, e)
            if key not in pow_cache:
                pow_cache[key] = subs[i] ** e
            return pow_cache[key]

        for m, c in self.terms.items():
            term = Polynomial.constant(c, n)
            for i, e in enumerate(m):
                if e:
                    term = term * power(i, e)
            result = result + term
        return result

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m in self.support():
            c = self.terms[m]
            mono = "*".join(
                f"x{i + 1}" + (f"^{e}" if e > 1 else "")
                for i, e in enumerate(m)
                if e
            )
            parts.append(f"{c:+g}" + (f"*{mono}" if mono else ""))
        return " ".join(parts)

    # -- serialization -----------------------------------------------------
    def to_json_obj(self) -> list[dict]:
        return [
            {"coeff": self.terms[m], "monomial": list(m)} for m in self.support()
        ]

    @classmethod
    def from_json_obj(cls, obj: Iterable[dict], n_vars: int) -> "Polynomial":
        terms: dict[Monomial, float] = {}
        for entry in obj:
            m = tuple(int(e) for e in entry["monomial"])
            terms[m] = terms.get(m, 0.0) + float(entry["coeff"])
        return cls(n_vars, terms)


@dataclass(frozen=True)
class RationalMap:
    """Vector-valued rational map b -> S(b) / R(b) with a shared denominator.

    For belief updates the numerators and the denominator are linear, so
    composing a degree-d polynomial and clearing denominators keeps the
    degree at most d.
    """

    numerators: tuple[Polynomial, ...]
    denominator: Polynomial

    def __post_init__(self):
        if self.denominator.is_zero():
            raise ValueError("denominator is identically zero")
        n = self.denominator.n_vars
        for s in self.numerators:
            if s.n_vars != n:
                raise ValueError("numerator/denominator arity mismatch")

    @property
    def n_vars(self) -> int:
        return self.denominator.n_vars

    @property
    def output_arity(self) -> int:
        return len(self.numerators)

    def eval(self, point: Sequence[float]) -> list[float]:
        r = self.denominator.eval(point)
        if abs(r) < 1e-300:
            raise ZeroDivisionError("rational map denominator vanishes at point")
        return [s.eval(point) / r for s in self.numerators]


def compose_rational(B: Polynomial, rmap: RationalMap) -> Polynomial:
    """Clear denominators of B(S/R): returns R^d * B(S/R) where d = deg(B).

    A term of B with total degree k picks up the factor R^(d-k), so the
    result is a genuine polynomial of degree <= d * max(deg S, deg R).
    """
    if B.n_vars != rmap.output_arity:
        raise ValueError(
            f"B has {B.n_vars} variables but the map outputs {rmap.output_arity}"
        )
    d = B.degree()
    n = rmap.n_vars
    R = rmap.denominator

    # Powers of R, and composed monomials S^m built by peeling one variable
    # at a time so shared sub-monomials are reused.
    r_pow: dict[int, Polynomial] = {0: Polynomial.constant(1.0, n)}

    def R_power(k: int) -> Polynomial:
        if k not in r_pow:
            r_pow[k] = R_power(k - 1) * R
        return r_pow[k]

    mono_cache: dict[Monomial, Polynomial] = {(0,) * B.n_vars: Polynomial.constant(1.0, n)}

    def composed_monomial(m: Monomial) -> Polynomial:
        if m in mono_cache:
            return mono_cache[m]
        for i, e in enumerate(m):
            if e:
                prev = list(m)
                prev[i] -= 1
                val = composed_monomial(tuple(prev)) * rmap.numerators[i]
                mono_cache[m] = val
                return val
        raise AssertionError("unreachable")

    result = Polynomial.zero(n)
    for m, c in B.terms.items():
        k = sum(m)
        result = result + composed_monomial(m).scale(c) * R_power(d - k)
    return result
