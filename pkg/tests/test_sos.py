import numpy as np
import pytest

from beliefbarrier.conic import SolveStatus, solve
from beliefbarrier.poly import Polynomial, monomial_basis
from beliefbarrier.sos import (
    LinExpr,
    OddLeadingTermError,
    PolyExpression,
    SosProgram,
)


def x_(i, n):
    return Polynomial.variable(i, n)


class TestGramBookkeeping:
    def test_new_sos_var_sizes(self):
        prog = SosProgram()
        var, _ = prog.new_sos_var(2, 2, "a")
        assert [sum(m) for m in var.basis] == [0, 1, 1]
        assert var.gram_dim == 3
        var2, _ = prog.new_sos_var(3, 4, "b")
        assert var2.gram_dim == 10
        var3, _ = prog.new_sos_var(1, 0, "c")
        assert var3.gram_dim == 1

    def test_odd_degree_rejected(self):
        prog = SosProgram()
        with pytest.raises(ValueError, match="even"):
            prog.new_sos_var(2, 3, "a")

    def test_gram_expansion_is_affine(self):
        prog = SosProgram()
        var, expr = prog.new_sos_var(2, 2, "a")
        # coefficient of each monomial is affine in the Gram entries
        for m, lin in expr.terms.items():
            assert lin.const == 0.0
            assert lin.coeffs


class TestAssertSos:
    def test_square_of_sum_feasible_rank_one(self):
        # x^2 + 2xy + y^2 = (x + y)^2
        n = 2
        p = x_(0, n) ** 2 + 2 * x_(0, n) * x_(1, n) + x_(1, n) ** 2
        prog = SosProgram()
        prog.assert_sos(PolyExpression.from_polynomial(p), "p")
        sol = solve(prog.compile())
        assert sol.status is SolveStatus.FEASIBLE
        cert = prog.extract_certificate(sol)
        g = cert.gram_factors["p"]
        # pruned basis is [x, y]; the unique Gram is [[1,1],[1,1]], rank 1
        assert g.gram.shape == (2, 2)
        assert np.allclose(g.gram, [[1, 1], [1, 1]], atol=1e-6)
        assert np.linalg.matrix_rank(g.gram, tol=1e-6) == 1
        assert not prog.check_certificate(cert, sol.x)
        squares = g.squares(n)
        total = Polynomial.zero(n)
        for q in squares:
            total = total + q * q
        assert total.almost_equal(p, tol=1e-6)

    def test_negative_square_infeasible(self):
        n = 1
        p = -(x_(0, n) ** 2)
        prog = SosProgram()
        prog.assert_sos(PolyExpression.from_polynomial(p), "p")
        sol = solve(prog.compile())
        assert sol.status is SolveStatus.INFEASIBLE

    def test_motzkin_polynomial_not_sos(self):
        # x^4 y^2 + x^2 y^4 - 3 x^2 y^2 + 1: nonnegative but not SOS.
        n = 2
        p = Polynomial(
            n, {(4, 2): 1.0, (2, 4): 1.0, (2, 2): -3.0, (0, 0): 1.0}
        )
        prog = SosProgram()
        prog.assert_sos(PolyExpression.from_polynomial(p), "motzkin")
        sol = solve(prog.compile())
        assert sol.status is SolveStatus.INFEASIBLE

    def test_motzkin_plus_constant_becomes_sos_like(self):
        # Adding a generous constant and the full-degree perturbation keeps the
        # program well-posed; the known SOS witness (x^2+y^2) * Motzkin is
        # heavier, so simply check a plainly-SOS cousin compiles feasibly.
        n = 2
        q = (x_(0, n) ** 2 + x_(1, n) ** 2 - 1) ** 2
        prog = SosProgram()
        prog.assert_sos(PolyExpression.from_polynomial(q), "ring")
        sol = solve(prog.compile())
        assert sol.status is SolveStatus.FEASIBLE

    def test_random_sums_of_squares_feasible(self):
        rng = np.random.default_rng(2)
        n = 3
        basis = monomial_basis(n, 3)
        for trial in range(5):
            total = Polynomial.zero(n)
            for _ in range(3):
                terms = {}
                for m in rng.choice(len(basis), size=4, replace=False):
                    terms[basis[m]] = rng.uniform(-1, 1)
                q = Polynomial(n, terms)
                total = total + q * q
            prog = SosProgram()
            prog.assert_sos(PolyExpression.from_polynomial(total), "p")
            sol = solve(prog.compile())
            assert sol.status is SolveStatus.FEASIBLE, f"trial {trial}"
            cert = prog.extract_certificate(sol)
            assert not prog.check_certificate(cert, sol.x)

    def test_shifted_sos_below_minimum_infeasible(self):
        # p = (x-1)^2 (x+1)^2 has minimum 0; p - 0.5 dips negative.
        n = 1
        p = ((x_(0, n) - 1) * (x_(0, n) + 1)) ** 2
        prog = SosProgram()
        prog.assert_sos(
            PolyExpression.from_polynomial(p - 0.5), "below"
        )
        sol = solve(prog.compile())
        assert sol.status in (SolveStatus.INFEASIBLE, SolveStatus.MARGINAL)
        assert sol.status is not SolveStatus.FEASIBLE

    def test_fixed_odd_leading_term_rejected(self):
        n = 1
        p = x_(0, n) ** 3 + 1
        prog = SosProgram()
        with pytest.raises(OddLeadingTermError):
            prog.assert_sos(PolyExpression.from_polynomial(p), "cubic")

    def test_variable_odd_leading_term_forced_to_cancel(self):
        # c * x^3 + x^2 with free c: feasible only with c = 0.
        n = 1
        prog = SosProgram()
        c = prog.scalar_var("c")
        expr = PolyExpression(n, {(3,): c, (2,): LinExpr(const=1.0)})
        prog.assert_sos(expr, "p")
        sol = solve(prog.compile())
        assert sol.status is SolveStatus.FEASIBLE
        assert abs(sol.x[0]) <= 1e-6


class TestPositivityOnSets:
    def test_affine_identity_on_halfline(self):
        # f = x is nonnegative on {x - 1 >= 0}: x = 1*(x-1) + 1.
        n = 1
        prog = SosProgram()
        f = PolyExpression.from_polynomial(x_(0, n))
        prog.assert_positive_on_set(
            f, "f", inequalities=[x_(0, n) - 1], multiplier_degree=0
        )
        sol = solve(prog.compile())
        assert sol.status is SolveStatus.FEASIBLE

    def test_margin_blocks_boundary_zero(self):
        # f = x^2 on {x >= 0} cannot clear a margin of 0.1 (f(0) = 0).
        n = 1
        prog = SosProgram()
        f = PolyExpression.from_polynomial(x_(0, n) ** 2)
        prog.assert_positive_on_set(
            f, "f", inequalities=[x_(0, n)], multiplier_degree=2, margin=0.1
        )
        sol = solve(prog.compile())
        assert sol.status is not SolveStatus.FEASIBLE

    def test_simplex_linear_bound(self):
        # f = 2 - b1 - b2 >= 0 on the probability simplex, degree-0 multipliers:
        # 2 - b1 - b2 = 1 * (1 - b1 - b2) + 0*b1 + 0*b2 + 1.
        n = 2
        b1, b2 = x_(0, n), x_(1, n)
        prog = SosProgram()
        f = PolyExpression.from_polynomial(2 - b1 - b2)
        prog.assert_positive_on_set(
            f,
            "f",
            inequalities=[b1, b2, 1 - b1 - b2],
            multiplier_degree=0,
        )
        sol = solve(prog.compile())
        assert sol.status is SolveStatus.FEASIBLE

    def test_equality_multipliers_absorb_indefinite_part(self):
        # f = 1 - x^2 - y^2 + 3xy is indefinite globally, but on the circle
        # {x^2 + y^2 = 1} it equals 3xy ... still sign-indefinite; use instead
        # f = 2 + xy on the circle: 2 + xy >= 2 - 1/2 > 0. A free multiplier
        # on (x^2 + y^2 - 1) must rescue the Gram.
        n = 2
        x, y = x_(0, n), x_(1, n)
        prog = SosProgram()
        f = PolyExpression.from_polynomial(2 + x * y)
        prog.assert_positive_on_set(
            f,
            "f",
            equalities=[x * x + y * y - 1],
            multiplier_degree=2,
            margin=0.1,
        )
        sol = solve(prog.compile())
        assert sol.status is SolveStatus.FEASIBLE


class TestExtraction:
    def test_scalar_and_poly_tracking(self):
        n = 1
        prog = SosProgram()
        s = prog.scalar_var("slack", lower=0.5, strict=True)
        B = prog.free_poly(n, 2, "B")
        # Pin B's constant coefficient to 1; B - slack must be SOS, which is
        # satisfiable (e.g. B = x^2 + 1 with slack 0.5).
        prog.assert_zero(
            PolyExpression(n, {(0,) * n: B.terms[(0,)] - 1.0})
        )
        prog.assert_sos(B - PolyExpression.constant(s, n), "cond")
        sol = solve(prog.compile())
        assert sol.status is SolveStatus.FEASIBLE
        cert = prog.extract_certificate(sol)
        assert "B" in cert.polynomials
        assert cert.scalars["slack"] >= 0.5
        assert cert.polynomials["B"].coeff((0,)) == pytest.approx(1.0, abs=1e-6)
