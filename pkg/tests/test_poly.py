import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beliefbarrier.poly import (
    Polynomial,
    RationalMap,
    compose_rational,
    grlex_key,
    monomial_basis,
)


def naive_product(p, q):
    """Independent term-by-term expansion oracle for multiplication."""
    terms = {}
    for m1, c1 in p.terms.items():
        for m2, c2 in q.terms.items():
            m = tuple(a + b for a, b in zip(m1, m2))
            terms[m] = terms.get(m, 0.0) + c1 * c2
    return terms


def random_poly(rng, n_vars=3, degree=3, n_terms=8):
    basis = monomial_basis(n_vars, degree)
    terms = {}
    for m in rng.sample(basis, min(n_terms, len(basis))):
        terms[m] = rng.uniform(-2, 2)
    return Polynomial(n_vars, terms)


def test_difference_of_squares():
    x1 = Polynomial.variable(0, 2)
    x2 = Polynomial.variable(1, 2)
    assert (x1 + x2) * (x1 - x2) == x1 * x1 - x2 * x2


def test_eval_square_of_sum():
    x1 = Polynomial.variable(0, 2)
    x2 = Polynomial.variable(1, 2)
    p = x1 * x1 + 2 * x1 * x2 + x2 * x2
    assert p.eval((1.0, 1.0)) == pytest.approx(4.0)


def test_mul_matches_naive_expansion():
    rng = random.Random(7)
    for _ in range(25):
        p = random_poly(rng)
        q = random_poly(rng)
        expected = {
            m: c for m, c in naive_product(p, q).items() if abs(c) > 1e-14
        }
        got = (p * q).terms
        assert set(got) == set(expected)
        for m in expected:
            assert got[m] == pytest.approx(expected[m], rel=1e-12, abs=1e-13)


def test_arity_mismatch_raises():
    p = Polynomial.variable(0, 2)
    q = Polynomial.variable(0, 3)
    with pytest.raises(ValueError):
        p + q
    with pytest.raises(ValueError):
        p * q


def test_monomial_basis_small():
    basis = monomial_basis(2, 1)
    assert basis == [(0, 0), (1, 0), (0, 1)]
    assert len(monomial_basis(3, 2)) == 10
    assert len(monomial_basis(3, 5)) == math.comb(8, 3)  # 56


def test_monomial_basis_sorted_and_unique():
    for n, d in [(1, 4), (2, 3), (3, 4), (4, 2)]:
        basis = monomial_basis(n, d)
        assert len(set(basis)) == len(basis)
        keys = [grlex_key(m) for m in basis]
        assert keys == sorted(keys)
        assert len(basis) == math.comb(n + d, d)


def test_min_degree_filter():
    basis = monomial_basis(3, 4, min_degree=2)
    assert all(2 <= sum(m) <= 4 for m in basis)
    assert len(basis) == math.comb(7, 3) - 4  # drop constant and 3 linear


coeffs = st.floats(min_value=-4, max_value=4, allow_nan=False, width=32)


@st.composite
def polys(draw, n_vars=2, max_degree=3):
    basis = monomial_basis(n_vars, max_degree)
    n_terms = draw(st.integers(min_value=0, max_value=6))
    terms = {}
    for _ in range(n_terms):
        m = draw(st.sampled_from(basis))
        terms[m] = draw(coeffs)
    return Polynomial(n_vars, terms)


@settings(max_examples=60, deadline=None)
@given(polys(), polys(), polys())
def test_ring_laws(p, q, r):
    assert (p + q).almost_equal(q + p, tol=1e-12)
    assert (p * q).almost_equal(q * p, tol=1e-12)
    assert ((p + q) + r).almost_equal(p + (q + r), tol=1e-12)
    assert (p * (q + r)).almost_equal(p * q + p * r, tol=1e-10)
    assert ((p * q) * r).almost_equal(p * (q * r), tol=1e-9)


def test_substitute_affine():
    # p(x) = x^2 with x -> y + 1 gives y^2 + 2y + 1
    p = Polynomial.variable(0, 1) ** 2
    y_plus_1 = Polynomial.variable(0, 1) + 1
    q = p.substitute({0: y_plus_1})
    expected = Polynomial(1, {(2,): 1.0, (1,): 2.0, (0,): 1.0})
    assert q.almost_equal(expected)


def test_json_round_trip():
    rng = random.Random(3)
    p = random_poly(rng)
    q = Polynomial.from_json_obj(p.to_json_obj(), p.n_vars)
    assert p == q


class TestComposeRational:
    def setup_method(self):
        b1 = Polynomial.variable(0, 2)
        b2 = Polynomial.variable(1, 2)
        self.b1, self.b2 = b1, b2
        self.rmap = RationalMap(
            numerators=(b1 + b2, b1 - b2),
            denominator=b1 + 2 * b2,
        )

    def test_degree_one_cancels(self):
        # B = b1: R^1 * (S1 / R) = S1
        B = Polynomial.variable(0, 2)
        assert compose_rational(B, self.rmap) == self.b1 + self.b2

    def test_constant_passthrough(self):
        B = Polynomial.constant(3.5, 2)
        assert compose_rational(B, self.rmap) == Polynomial.constant(3.5, 2)

    def test_square_by_hand(self):
        # B = b1^2, S1 = b1 + b2, R = b1 + 2 b2: R^2 (S1/R)^2 = S1^2 = (b1+b2)^2
        B = Polynomial.variable(0, 2) ** 2
        expected = (self.b1 + self.b2) * (self.b1 + self.b2)
        assert compose_rational(B, self.rmap).almost_equal(expected)

    def test_mixed_degrees_prefactor(self):
        # B = b1^2 + b2 + 1: term degrees 2, 1, 0 pick up R^0, R^1, R^2
        R = self.b1 + 2 * self.b2
        B = self.b1 * self.b1 + self.b2 + 1
        expected = (self.b1 + self.b2) ** 2 + (self.b1 - self.b2) * R + R * R
        assert compose_rational(B, self.rmap).almost_equal(expected, tol=1e-12)

    def test_pointwise_against_direct_evaluation(self):
        rng = random.Random(11)
        checked = 0
        while checked < 100:
            nums = tuple(random_poly(rng, n_vars=2, degree=1, n_terms=3) for _ in range(2))
            den = random_poly(rng, n_vars=2, degree=1, n_terms=3)
            if den.is_zero():
                continue
            B = random_poly(rng, n_vars=2, degree=3, n_terms=6)
            point = (rng.uniform(-1, 1), rng.uniform(-1, 1))
            r = den.eval(point)
            if abs(r) < 0.1:
                continue
            rmap = RationalMap(numerators=nums, denominator=den)
            composed = compose_rational(B, rmap)
            direct = r ** B.degree() * B.eval([s.eval(point) / r for s in nums])
            assert composed.eval(point) == pytest.approx(direct, rel=1e-8, abs=1e-10)
            checked += 1
