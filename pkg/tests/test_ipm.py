import math

import numpy as np
import pytest

from conftest import identity
from core import ipm
from core.errors import ValidationError
from core.sdp import ConicConstraint, ConicProblem, build_sdp, split_lifted


def _trivial():
    """min trace(M) s.t. M[0,0] = 1 on a 2x2 block; optimum 1."""
    return ConicProblem(
        psd_dim=2, slack_dim=0, C=np.eye(2),
        constraints=(ConicConstraint.from_terms("corner", [(0, 0, 1.0)], rhs=1.0),),
        label="trivial",
    )


def test_trivial_sdp():
    sol = ipm.solve(_trivial())
    assert sol.optimal
    assert sol.primal_obj == pytest.approx(1.0, abs=1e-7)
    assert sol.dual_obj == pytest.approx(1.0, abs=1e-7)
    assert sol.M[0, 0] == pytest.approx(1.0, abs=1e-7)


def test_identity_full_cardinality_bound():
    sol = ipm.solve(build_sdp(identity(3, aleph=3)))
    assert sol.optimal
    assert sol.lower_bound == pytest.approx(1.0 / 12.0, abs=1e-6)
    assert sol.lower_bound_is_safe


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_generated_instances_converge(generated_instance, seed):
    inst = generated_instance(n=8, seed=seed, aleph=3)
    sol = ipm.solve(build_sdp(inst))
    assert sol.status is ipm.SolveStatus.OPTIMAL
    assert sol.rel_gap <= 1e-8
    assert sol.iterations <= 100
    assert sol.primal_res <= 1e-8 and sol.dual_res <= 1e-8
    # an optimal iterate is PSD up to rounding
    lifted = split_lifted(sol.M, inst.n)
    assert lifted.eigenvalues[0] >= -1e-8 * max(1.0, lifted.eigenvalues[-1])


def test_weak_duality_on_near_feasible_iterates(generated_instance):
    inst = generated_instance(n=6, seed=4, aleph=2)
    sol = ipm.solve(build_sdp(inst))
    near = [h for h in sol.history if h["pres"] <= 1e-7 and h["dres"] <= 1e-7]
    assert near, "solver never reached a near-feasible iterate"
    for h in near:
        assert h["dobj"] <= h["pobj"] + 1e-6 * (1.0 + abs(h["pobj"]))
    assert sol.dual_obj <= sol.primal_obj + 1e-7 * (1.0 + abs(sol.primal_obj))


def test_history_records(generated_instance):
    sol = ipm.solve(build_sdp(generated_instance(n=4, seed=1)))
    assert len(sol.history) == sol.iterations + 1
    assert [h["iter"] for h in sol.history] == list(range(len(sol.history)))
    for h in sol.history:
        assert set(h) == {"iter", "pobj", "dobj", "gap", "pres", "dres", "step_p", "step_d"}
        assert all(math.isfinite(v) for v in h.values())
        assert 0.0 <= h["step_p"] <= 1.0 and 0.0 <= h["step_d"] <= 1.0


def test_objective_scale_covariance(generated_instance):
    inst = generated_instance(n=5, seed=2, aleph=2)
    prob = build_sdp(inst)
    scaled = ConicProblem(psd_dim=prob.psd_dim, slack_dim=prob.slack_dim, C=10.0 * prob.C,
                          constraints=prob.constraints, label="scaled")
    base = ipm.solve(prob)
    big = ipm.solve(scaled)
    assert base.optimal and big.optimal
    assert big.dual_obj == pytest.approx(10.0 * base.dual_obj, rel=1e-6, abs=1e-8)
    assert big.primal_obj == pytest.approx(10.0 * base.primal_obj, rel=1e-6, abs=1e-8)

    def top(sol):
        x = split_lifted(sol.M, inst.n).x
        return set(np.argsort(-x)[:inst.aleph].tolist())

    # scaling the objective leaves the leading holdings in place
    assert top(big) == top(base)


def test_max_iter_returns_best_iterate(generated_instance):
    sol = ipm.solve(build_sdp(generated_instance(n=6)), ipm.SolverConfig(max_iter=2))
    assert sol.status is ipm.SolveStatus.MAX_ITER
    assert not sol.optimal
    assert sol.iterations == 2
    best = min(max(h["gap"], h["pres"], h["dres"]) for h in sol.history)
    assert max(sol.rel_gap, sol.primal_res, sol.dual_res) == best


def test_summary_keys():
    summary = ipm.solve(_trivial()).summary()
    assert summary["status"] == "Optimal"
    assert {"primal_obj", "dual_obj", "rel_gap", "iterations", "wall_time"} <= set(summary)


@pytest.mark.parametrize("kwargs", [
    {"gap_tol": 0.0},
    {"feas_tol": -1e-8},
    {"max_iter": 0},
    {"step_fraction": 1.0},
])
def test_solver_config_validation(kwargs):
    with pytest.raises(ValidationError):
        ipm.SolverConfig(**kwargs)
