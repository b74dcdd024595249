import numpy as np
import pytest

from beliefbarrier.conic import (
    ConicProgram,
    ConicSolution,
    LmiBlock,
    SolveStatus,
    solve,
    validate_solution,
)


def single_var_block(entries_f0, entries_f1, strict=False, name=""):
    return LmiBlock(
        dim=len(entries_f0),
        F0=np.array(entries_f0, dtype=float),
        coeffs={0: np.array(entries_f1, dtype=float)},
        strict=strict,
        name=name,
    )


class TestAnalyticCases:
    def test_strict_scalar_margin_caps_at_t_max(self):
        # x - 1 > 0 with free x: feasible with margin at the configured cap.
        prog = ConicProgram(
            n_vars=1,
            blocks=[single_var_block([[-1.0]], [[1.0]], strict=True)],
        )
        sol = solve(prog, t_max=1.0)
        assert sol.status is SolveStatus.FEASIBLE
        assert sol.margin == pytest.approx(1.0, abs=1e-5)

    def test_contradictory_scalars_infeasible(self):
        prog = ConicProgram(
            n_vars=1,
            blocks=[
                single_var_block([[-1.0]], [[1.0]], strict=True, name="x-1"),
                single_var_block([[0.0]], [[-1.0]], strict=True, name="-x"),
            ],
        )
        sol = solve(prog)
        assert sol.status is SolveStatus.INFEASIBLE
        # best joint slack is -1/2 at x = 1/2
        assert sol.margin == pytest.approx(-0.5, abs=1e-5)

    def test_maximize_entry_of_correlation_block(self):
        # [[1, x], [x, 1]] >= 0, maximize x: optimum 1 from 1 - x^2 >= 0.
        prog = ConicProgram(
            n_vars=1,
            blocks=[single_var_block([[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [1.0, 0.0]])],
            objective=np.array([1.0]),
        )
        sol = solve(prog)
        assert sol.status is SolveStatus.FEASIBLE
        assert sol.x[0] == pytest.approx(1.0, abs=1e-6)
        report = validate_solution(prog, sol)
        assert report.min_block_eigs[0] == pytest.approx(0.0, abs=1e-5)

    def test_fixed_block_feasible_boundary(self):
        # No variables reach this block; rank-1 PSD constant must pass.
        prog = ConicProgram(
            n_vars=1,
            blocks=[
                LmiBlock(dim=2, F0=np.array([[1.0, 1.0], [1.0, 1.0]]), coeffs={}),
                single_var_block([[0.0]], [[1.0]]),
            ],
        )
        sol = solve(prog)
        assert sol.status is SolveStatus.FEASIBLE

    def test_fixed_block_infeasible(self):
        prog = ConicProgram(
            n_vars=1,
            blocks=[
                LmiBlock(dim=2, F0=np.array([[1.0, 2.0], [2.0, 1.0]]), coeffs={}),
                single_var_block([[0.0]], [[1.0]]),
            ],
        )
        sol = solve(prog)
        assert sol.status is SolveStatus.INFEASIBLE

    def test_equalities_reduce_problem(self):
        # x0 + x1 = 1, block diag(x0, x1) >= 0 strictly: margin 1/2 at x = (.5, .5).
        prog = ConicProgram(
            n_vars=2,
            blocks=[
                LmiBlock(
                    dim=2,
                    F0=np.zeros((2, 2)),
                    coeffs={
                        0: np.diag([1.0, 0.0]),
                        1: np.diag([0.0, 1.0]),
                    },
                    strict=True,
                )
            ],
            eq_A=np.array([[1.0, 1.0]]),
            eq_c=np.array([1.0]),
        )
        sol = solve(prog)
        assert sol.status is SolveStatus.FEASIBLE
        assert sol.margin == pytest.approx(0.5, abs=1e-5)
        assert sol.x[0] + sol.x[1] == pytest.approx(1.0, abs=1e-9)

    def test_inconsistent_equalities(self):
        prog = ConicProgram(
            n_vars=1,
            blocks=[single_var_block([[0.0]], [[1.0]])],
            eq_A=np.array([[1.0], [1.0]]),
            eq_c=np.array([0.0, 1.0]),
        )
        sol = solve(prog)
        assert sol.status is SolveStatus.INFEASIBLE
        assert "inconsistent" in sol.message

    def test_linear_inequalities(self):
        # x >= 2 and -x >= -3 (i.e. x <= 3), maximize x.
        prog = ConicProgram(
            n_vars=1,
            ineq_G=np.array([[1.0], [-1.0]]),
            ineq_h=np.array([2.0, -3.0]),
            objective=np.array([1.0]),
        )
        sol = solve(prog)
        assert sol.status is SolveStatus.FEASIBLE
        assert sol.x[0] == pytest.approx(3.0, abs=1e-6)

    def test_strict_inequality_infeasible_band(self):
        # 0 <= x and x <= 0 with x strict positive: marginal, not feasible.
        prog = ConicProgram(
            n_vars=1,
            ineq_G=np.array([[1.0], [-1.0]]),
            ineq_h=np.array([0.0, 0.0]),
            ineq_strict=np.array([True, False]),
        )
        sol = solve(prog)
        assert sol.status in (SolveStatus.MARGINAL, SolveStatus.INFEASIBLE)
        assert sol.status is not SolveStatus.FEASIBLE


class TestProperties:
    def _random_program(self, rng, n_vars=4, dim=3, strict=False):
        mats = []
        for _ in range(n_vars):
            A = rng.normal(size=(dim, dim))
            mats.append(0.5 * (A + A.T))
        x_star = rng.normal(size=n_vars)
        F_at_star = sum(x * F for x, F in zip(x_star, mats))
        F0 = -F_at_star + np.eye(dim) * rng.uniform(0.5, 2.0)
        return ConicProgram(
            n_vars=n_vars,
            blocks=[
                LmiBlock(dim=dim, F0=F0, coeffs=dict(enumerate(mats)), strict=strict)
            ],
        ), x_star

    def test_randomly_generated_feasible_programs(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            prog, _ = self._random_program(rng, strict=True)
            sol = solve(prog)
            assert sol.status is SolveStatus.FEASIBLE
            report = validate_solution(prog, sol)
            assert report.clean

    def test_margin_is_certified_lower_bound(self):
        rng = np.random.default_rng(6)
        prog, _ = self._random_program(rng, strict=True)
        sol = solve(prog)
        report = validate_solution(prog, sol)
        assert min(report.min_block_eigs) >= sol.margin - 1e-6

    def test_margin_tight_when_cap_inactive(self):
        # max min(x - 1, 3 - x) = 1 at x = 2, below the cap.
        prog = ConicProgram(
            n_vars=1,
            blocks=[
                single_var_block([[-1.0]], [[1.0]], strict=True),
                single_var_block([[3.0]], [[-1.0]], strict=True),
            ],
        )
        sol = solve(prog, t_max=5.0)
        assert sol.status is SolveStatus.FEASIBLE
        assert sol.margin == pytest.approx(1.0, abs=1e-5)
        report = validate_solution(prog, sol)
        assert min(report.min_block_eigs) == pytest.approx(sol.margin, abs=1e-5)

    def test_warm_start_idempotent_status(self):
        rng = np.random.default_rng(7)
        prog, _ = self._random_program(rng, strict=True)
        first = solve(prog)
        again = solve(prog, warm_start=first.x)
        assert again.status is first.status

    def test_scaling_robustness(self):
        rng = np.random.default_rng(8)
        for strict in (False, True):
            prog, _ = self._random_program(rng, strict=strict)
            sol = solve(prog)
            scaled = ConicProgram(
                n_vars=prog.n_vars,
                blocks=[
                    LmiBlock(
                        dim=b.dim,
                        F0=10.0 * b.F0,
                        coeffs={i: 10.0 * F for i, F in b.coeffs.items()},
                        strict=b.strict,
                    )
                    for b in prog.blocks
                ],
            )
            sol10 = solve(scaled)
            assert sol10.status is sol.status

    def test_perturbed_solution_flagged(self):
        prog = ConicProgram(
            n_vars=1,
            blocks=[single_var_block([[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [1.0, 0.0]])],
            objective=np.array([1.0]),
        )
        sol = solve(prog)
        bad = ConicSolution(
            status=sol.status,
            x=sol.x + 0.1,
            margin=sol.margin,
            objective_value=sol.objective_value,
            residuals=sol.residuals,
            iterations=sol.iterations,
        )
        report = validate_solution(prog, bad)
        assert not report.clean


@pytest.mark.parametrize("seed", range(6))
def test_cross_check_against_cvxopt(seed):
    cvxopt = pytest.importorskip("cvxopt")
    rng = np.random.default_rng(seed)
    n_vars = int(rng.integers(2, 5))
    dim = int(rng.integers(2, 4))
    mats = []
    for _ in range(n_vars):
        A = rng.normal(size=(dim, dim))
        mats.append(0.5 * (A + A.T))
    F0 = rng.normal(size=(dim, dim))
    F0 = 0.5 * (F0 + F0.T) + np.eye(dim) * rng.normal()
    prog = ConicProgram(
        n_vars=n_vars,
        blocks=[LmiBlock(dim=dim, F0=F0, coeffs=dict(enumerate(mats)), strict=True)],
        ineq_G=rng.normal(size=(2, n_vars)),
        ineq_h=rng.normal(size=2) - 2.0,
    )
    ours = solve(prog)
    theirs = solve(prog, backend="cvxopt")
    # Statuses must agree on the feasible/infeasible call; the margin values
    # agree to solver accuracy.
    assert (ours.status is SolveStatus.FEASIBLE) == (theirs.status is SolveStatus.FEASIBLE)
    if ours.status is SolveStatus.FEASIBLE:
        assert ours.margin == pytest.approx(theirs.margin, abs=1e-4)
