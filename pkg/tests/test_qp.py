import numpy as np
import pytest

from conftest import identity
from core.errors import DimensionMismatch
from core.qp import QpProblem, QpStatus, epigraph_problem, max_return, qp_residuals, solve_qp
from core.sdp import Budget


def test_single_stock():
    res = solve_qp(QpProblem.of(identity(3), [0]))
    assert res.feasible
    assert res.objective == pytest.approx(0.25, abs=1e-7)
    np.testing.assert_allclose(res.x, [0.5, 0.0, 0.0], atol=1e-6)


def test_two_stocks_split_evenly():
    res = solve_qp(QpProblem.of(identity(3), [1, 0]))
    assert res.support == (0, 1)
    assert res.objective == pytest.approx(0.125, abs=1e-7)
    np.testing.assert_allclose(res.x, [0.25, 0.25, 0.0], atol=1e-6)


def test_empty_support_infeasible_for_positive_rho():
    res = solve_qp(QpProblem.of(identity(3), []))
    assert res.status is QpStatus.INFEASIBLE
    assert res.objective == np.inf
    assert "below rho" in res.note


def test_empty_support_feasible_for_zero_rho():
    res = solve_qp(QpProblem.of(identity(3, rho=0.0), []))
    assert res.feasible and res.objective == 0.0


def test_zeros_off_support_are_exact(generated_instance):
    inst = generated_instance(n=8, seed=5)
    support = [0, 2, 3, 6]
    prob = QpProblem.of(inst, support)
    res = solve_qp(prob)
    if not res.feasible:
        pytest.skip("support cannot reach rho for this draw")
    assert prob.forced_zero == (1, 4, 5, 7)
    assert np.all(res.x[list(prob.forced_zero)] == 0.0)
    assert max(qp_residuals(inst, res.x).values()) <= 1e-7


def test_objective_monotone_in_support(generated_instance):
    inst = generated_instance(n=6, seed=1)
    full = solve_qp(QpProblem.of(inst, range(6)))
    assert full.feasible
    prev = full.objective
    for drop in range(1, 4):
        res = solve_qp(QpProblem.of(inst, range(drop, 6)))
        if not res.feasible:
            break
        assert res.objective >= prev - 1e-7
        prev = res.objective


def test_exact_budget_two_stocks():
    res = solve_qp(QpProblem.of(identity(3), [0, 1], Budget.EXACT))
    assert res.objective == pytest.approx(0.5, abs=1e-7)
    assert res.x.sum() == pytest.approx(1.0, abs=1e-7)


def test_exact_budget_met_only_by_upper_bounds():
    inst = identity(3, u=np.array([0.6, 0.4, 1.0]))
    res = solve_qp(QpProblem.of(inst, [0, 1], Budget.EXACT))
    assert res.feasible
    np.testing.assert_allclose(res.x, [0.6, 0.4, 0.0])
    assert res.objective == pytest.approx(0.52)


def test_exact_budget_short_upper_bounds_infeasible():
    inst = identity(3, u=np.array([0.3, 0.3, 1.0]))
    res = solve_qp(QpProblem.of(inst, [0, 1], Budget.EXACT))
    assert res.status is QpStatus.INFEASIBLE
    assert "upper bounds" in res.note


def test_tight_return_uses_greedy_point():
    inst = identity(3, rho=0.5, u=np.array([0.25, 0.25, 1.0]))
    res = solve_qp(QpProblem.of(inst, [0, 1]))
    assert res.feasible
    np.testing.assert_allclose(res.x, [0.25, 0.25, 0.0])


def test_max_return_greedy_order():
    inst = identity(3, u=np.array([0.7, 0.7, 0.7]))
    assert max_return(inst, [0, 1]) == pytest.approx(1.0)
    assert max_return(inst, [2]) == pytest.approx(0.7)


def test_support_out_of_range():
    with pytest.raises(DimensionMismatch):
        QpProblem.of(identity(3), [3])


def test_epigraph_layout():
    prob = epigraph_problem(QpProblem.of(identity(4), [0, 2]))
    # [x_S (2), return, budget, upper_S (2)]
    assert prob.psd_dim == 3
    assert prob.slack_dim == 6
    prob.validate()


def test_residuals_report_violations():
    inst = identity(3)
    res = qp_residuals(inst, [0.2, 0.0, -0.1], Budget.EXACT)
    assert res["return"] == pytest.approx(0.4)
    assert res["budget"] == pytest.approx(0.9)
    assert res["lower"] == pytest.approx(0.1)
    assert res["upper"] == 0.0
