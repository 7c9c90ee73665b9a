import math

import numpy as np
import pytest

from conftest import identity
from core import cardopt, ipm
from core.errors import NumericalFailure
from core.exact import continuous_bound
from core.instance import Instance
from core.qp import QpProblem, solve_qp
from core.sdp import lift_portfolio, split_lifted


@pytest.mark.parametrize("ub, lb, gap, flagged", [
    (0.25, 0.25, 0.0, False),
    (0.5, 0.25, 0.5, False),
    (0.25, 0.0, 1.0, False),
    (0.0, 0.0, 0.0, False),
    (1e-13, 0.0, 0.0, False),
])
def test_relative_gap(ub, lb, gap, flagged):
    assert cardopt.relative_gap(ub, lb) == (pytest.approx(gap), flagged)


@pytest.mark.parametrize("ub, lb", [(1e-13, -1.0), (math.inf, 0.1), (0.2, math.nan)])
def test_relative_gap_undefined(ub, lb):
    gap, flagged = cardopt.relative_gap(ub, lb)
    assert flagged and math.isnan(gap)


def test_lower_bound_single_stock_identity():
    lb, lifted, stats = cardopt.lower_bound(identity(3, aleph=1))
    assert stats.optimal
    assert lb <= 0.25 + 1e-6
    assert lb == pytest.approx(0.25, abs=1e-5)
    assert lifted.x.shape == (3,)


def test_lower_bound_full_cap_matches_continuous(generated_instance):
    inst = generated_instance(n=5, seed=3, aleph=5)
    lb, _, _ = cardopt.lower_bound(inst)
    assert lb == pytest.approx(continuous_bound(inst).objective, rel=1e-5, abs=1e-7)


def test_candidate_top_support():
    inst = identity(4, aleph=2)
    lifted = split_lifted(lift_portfolio([0.5, 0.3, 0.2, 1e-9]), 4, inst.Q)
    assert cardopt.candidate_supports(inst, lifted)[0] == (0, 1)
    portfolio = cardopt.round_solution(inst, lifted)
    assert portfolio.support == (0, 1)
    assert portfolio.objective == pytest.approx(0.125, abs=1e-7)
    assert portfolio.max_residual <= 1e-7


def test_rounding_skips_supports_that_miss_return():
    inst = Instance(Q=np.eye(4), mu=np.array([0.1, 0.1, 1.0, 1.0]), rho=0.5, u=np.ones(4),
                    aleph=2, name="weak-leaders")
    lifted = split_lifted(lift_portfolio([0.5, 0.3, 0.2, 1e-9]), 4, inst.Q)
    assert cardopt.candidate_supports(inst, lifted) == [(0, 1), (0, 2), (2, 3)]
    portfolio = cardopt.round_solution(inst, lifted)
    assert portfolio.support == (2, 3)
    assert portfolio.objective == pytest.approx(0.125, abs=1e-7)
    assert portfolio.feas_residuals["return"] <= 1e-7


def test_run_identity_closes_gap():
    report = cardopt.run(identity(3, aleph=1))
    assert report.sdp_status == "Optimal"
    assert report.round_status == "ok"
    assert report.ub == pytest.approx(0.25, abs=1e-7)
    assert report.lb_sdp <= report.ub + 1e-7
    assert report.closed and report.lb_safe
    assert [s.name for s in report.stages] == ["sdp", "round"]
    assert report.to_dict()["portfolio"]["support"] in ([0], [1], [2])


def test_run_flags_unreachable_return():
    report = cardopt.run(identity(3, rho=2.0))
    assert report.sdp_status == ipm.SolveStatus.PRIMAL_INFEASIBLE.value
    assert report.round_status == "skipped"
    assert report.portfolio is None
    assert report.ub == math.inf
    assert report.gap_flagged
    assert report.rank == -1
    assert not report.stages[0].success


def test_run_zero_cap():
    report = cardopt.run(identity(3, aleph=0))
    assert report.portfolio is None
    assert report.sdp_status == ipm.SolveStatus.PRIMAL_INFEASIBLE.value


def test_stage_runner_records_failures():
    runner = cardopt.StageRunner()

    def boom():
        raise NumericalFailure("broke", status="NumericalFailure")

    ok = runner.execute("first", lambda a, b=0: a + b, 1, b=2)
    bad = runner.execute("second", boom)
    runner.mark("third", "skipped")
    assert ok["success"] and ok["result"] == 3
    assert not bad["success"] and bad["status"] == "NumericalFailure"
    assert [r.success for r in runner.history] == [True, False, True]
    assert runner.history[1].to_dict()["error"] == "broke"


def test_stage_runner_lets_programming_errors_through():
    runner = cardopt.StageRunner()
    with pytest.raises(ZeroDivisionError):
        runner.execute("bad", lambda: 1 / 0)


def test_rounding_keeps_lowest_risk_candidate():
    inst = Instance(Q=np.eye(4), mu=np.array([1.0, 0.1, 1.0, 1.0]), rho=0.5, u=np.ones(4),
                    aleph=2, name="weak-second")
    lifted = split_lifted(lift_portfolio([0.5, 0.3, 0.2, 1e-9]), 4, inst.Q)
    candidates = cardopt.candidate_supports(inst, lifted)
    assert candidates[:2] == [(0, 1), (0, 2)]
    # (0, 1) is feasible but pays for the weak second stock
    first = solve_qp(QpProblem.of(inst, (0, 1)))
    assert first.feasible and first.objective == pytest.approx(0.25 / 1.01, abs=1e-7)
    portfolio = cardopt.round_solution(inst, lifted)
    assert portfolio.support == (0, 2)
    assert portfolio.objective == pytest.approx(0.125, abs=1e-7)


def _permuted(inst, perm):
    return Instance(Q=inst.Q[np.ix_(perm, perm)], mu=inst.mu[perm], rho=inst.rho, u=inst.u[perm],
                    aleph=inst.aleph, name=f"{inst.name}-perm")


@pytest.mark.parametrize("seed", range(4))
def test_rounding_is_permutation_equivariant(generated_instance, seed):
    inst = generated_instance(n=7, seed=seed, aleph=3)
    rng = np.random.default_rng(seed)
    x = rng.dirichlet(np.ones(7)) * 0.8
    perm = rng.permutation(7)
    lifted = split_lifted(lift_portfolio(x), 7, inst.Q)
    moved = split_lifted(lift_portfolio(x[perm]), 7, inst.Q[np.ix_(perm, perm)])
    base = cardopt.round_solution(inst, lifted)
    other = cardopt.round_solution(_permuted(inst, perm), moved)
    assert base is not None and other is not None
    # position j of the permuted instance is stock perm[j] of the original
    assert tuple(sorted(int(perm[j]) for j in other.support)) == base.support
    assert other.objective == pytest.approx(base.objective, rel=1e-6, abs=1e-10)
