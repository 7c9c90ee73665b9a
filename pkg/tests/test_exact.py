import math

import pytest

from conftest import identity
from core.errors import TooLarge
from core.exact import ExactStatus, branch_and_bound, continuous_bound, enumerate_supports
from core.sdp import Budget


@pytest.mark.parametrize("aleph, expected", [(1, 0.25), (2, 0.125), (3, 1.0 / 12.0)])
def test_enumeration_identity(aleph, expected):
    res = enumerate_supports(identity(3, aleph=aleph))
    assert res.proven
    assert res.ub == pytest.approx(expected, abs=1e-7)
    assert res.lb == res.ub
    assert res.gap == 0.0
    assert res.best_x.card == aleph


def test_enumeration_zero_cap_is_infeasible():
    res = enumerate_supports(identity(3, aleph=0))
    assert res.status is ExactStatus.INFEASIBLE
    assert res.best_x is None
    assert res.ub == math.inf


def test_enumeration_too_large():
    with pytest.raises(TooLarge) as info:
        enumerate_supports(identity(30, aleph=15))
    assert info.value.count == math.comb(30, 15)


def test_enumeration_respects_limit_argument():
    with pytest.raises(TooLarge):
        enumerate_supports(identity(6, aleph=3), limit=10)


def test_full_cap_closes_at_root():
    res = branch_and_bound(identity(4, aleph=4), seed_with_sdp=False)
    assert res.proven
    assert res.nodes == 1
    assert res.ub == pytest.approx(1.0 / 16.0, abs=1e-7)


def test_zero_cap_is_infeasible():
    res = branch_and_bound(identity(3, aleph=0))
    assert res.status is ExactStatus.INFEASIBLE


def test_identity_ten_stocks():
    res = branch_and_bound(identity(10, aleph=2), seed_with_sdp=False)
    assert res.proven
    assert res.ub == pytest.approx(0.125, abs=1e-7)
    assert res.best_x.card == 2


def test_matches_enumeration(generated_instance):
    inst = generated_instance(n=8, seed=0, aleph=3)
    enum = enumerate_supports(inst)
    bb = branch_and_bound(inst)
    assert bb.proven and enum.proven
    assert bb.ub == pytest.approx(enum.ub, rel=1e-6, abs=1e-9)
    assert bb.best_x.card <= 3


def test_parallel_workers_agree(generated_instance):
    inst = generated_instance(n=8, seed=2, aleph=2)
    serial = branch_and_bound(inst, seed_with_sdp=False)
    parallel = branch_and_bound(inst, jobs=2, seed_with_sdp=False)
    assert parallel.proven
    assert parallel.ub == pytest.approx(serial.ub, rel=1e-6, abs=1e-9)


def test_node_limit_reports_bounds():
    res = branch_and_bound(identity(10, aleph=2), node_limit=3, seed_with_sdp=False)
    assert res.status is ExactStatus.TIME_LIMIT
    assert res.note == "node limit"
    assert res.nodes == 3
    assert res.lb <= res.ub


def test_time_limit_before_root():
    res = branch_and_bound(identity(10, aleph=2), time_limit=0.0, seed_with_sdp=False)
    assert res.status is ExactStatus.TIME_LIMIT
    assert res.note == "time limit"
    assert res.lb <= res.ub


def test_exact_budget(generated_instance):
    inst = generated_instance(n=6, seed=1, aleph=2)
    enum = enumerate_supports(inst, Budget.EXACT)
    bb = branch_and_bound(inst, budget=Budget.EXACT, seed_with_sdp=False)
    assert bb.status is enum.status
    if enum.proven:
        assert bb.ub == pytest.approx(enum.ub, rel=1e-6, abs=1e-9)
        assert bb.best_x.x.sum() == pytest.approx(1.0, abs=1e-7)


def test_continuous_bound_below_exact(generated_instance):
    inst = generated_instance(n=7, seed=3, aleph=2)
    relaxed = continuous_bound(inst)
    enum = enumerate_supports(inst)
    assert relaxed.objective <= enum.ub + 1e-8
    assert continuous_bound(identity(3)).objective == pytest.approx(1.0 / 12.0, abs=1e-7)


def test_result_dict():
    data = branch_and_bound(identity(3, aleph=1), seed_with_sdp=False).to_dict()
    assert data["status"] == "Proven"
    assert data["best_x"]["support"] in ([0], [1], [2])
