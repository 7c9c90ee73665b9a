import json

import numpy as np
import pytest

from core.errors import ParseError, ValidationError
from core.instance import (GenSpec, Instance, dumps_instance, generate_instance, load_instance,
                           loads_instance, save_instance)
from core.qp import QpProblem, max_return, solve_qp

CANONICAL = {"n": 3, "aleph": 1, "rho": 0.5, "mu": [1, 1, 1], "u": [1, 1, 1],
             "Q": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}


def _write(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_load_identity_instance(tmp_path):
    inst = load_instance(_write(tmp_path / "ident.json", CANONICAL))
    assert inst.n == 3 and inst.aleph == 1 and inst.rho == 0.5
    assert np.array_equal(inst.Q, np.eye(3))
    assert inst.name == "ident"


def test_asymmetric_q_rejected(tmp_path):
    data = dict(CANONICAL, Q=[[1, 1, 0], [2, 1, 0], [0, 0, 1]])
    with pytest.raises(ValidationError) as err:
        load_instance(_write(tmp_path / "bad.json", data))
    assert err.value.invariant == "symmetry"


@pytest.mark.parametrize("change,invariant", [
    ({"u": [1, -0.1, 1]}, "upper_bounds"),
    ({"aleph": 4}, "aleph_range"),
    ({"aleph": -1}, "aleph_range"),
    ({"Q": [[1, 0, 0], [0, -1, 0], [0, 0, 1]]}, "psd"),
    ({"mu": [1, 1]}, "dimension"),
])
def test_invariant_violations_named(tmp_path, change, invariant):
    with pytest.raises(ValidationError) as err:
        load_instance(_write(tmp_path / "bad.json", dict(CANONICAL, **change)))
    assert err.value.invariant == invariant


def test_missing_file_and_key(tmp_path):
    with pytest.raises(ParseError, match="file not found"):
        load_instance(tmp_path / "missing.json")
    data = {k: v for k, v in CANONICAL.items() if k != "rho"}
    with pytest.raises(ParseError, match="rho"):
        load_instance(_write(tmp_path / "norho.json", data))


def test_malformed_and_non_finite_json():
    with pytest.raises(ParseError):
        loads_instance("{not json")
    with pytest.raises(ParseError):
        loads_instance(json.dumps(CANONICAL).replace('"rho": 0.5', '"rho": NaN'))


def test_large_instance_lifted_dimension():
    n = 400
    inst = Instance(Q=np.eye(n), mu=np.ones(n), rho=0.1, u=np.ones(n), aleph=5)
    assert inst.lifted_dim == 801


def test_save_load_round_trip(tmp_path, generated_instance):
    inst = generated_instance(n=7, seed=11)
    path = save_instance(inst, tmp_path / "g.json")
    again = load_instance(path)
    assert again == inst
    assert save_instance(again, tmp_path / "h.json").read_bytes() == path.read_bytes()


def test_generator_is_deterministic():
    a = generate_instance(GenSpec(n=10, seed=7))
    b = generate_instance(GenSpec(n=10, seed=7))
    c = generate_instance(GenSpec(n=10, seed=8))
    assert dumps_instance(a) == dumps_instance(b)
    assert not np.array_equal(a.Q, c.Q)


@pytest.mark.parametrize("seed", range(5))
def test_generated_instance_is_psd_and_feasible(seed):
    inst = generate_instance(GenSpec(n=12, seed=seed, target_rho_quantile=0.3))
    assert np.linalg.eigvalsh(inst.Q)[0] >= -1e-10
    assert 1 <= inst.aleph <= inst.n
    best_single = int(np.argmax(inst.mu * np.minimum(inst.u, 1.0)))
    assert max_return(inst, [best_single]) >= inst.rho


def test_genspec_validation():
    with pytest.raises(ValidationError):
        GenSpec(n=0)
    with pytest.raises(ValidationError):
        GenSpec(n=5, target_rho_quantile=1.5)


def test_instance_arrays_are_read_only(identity_instance):
    with pytest.raises(ValueError):
        identity_instance.Q[0, 0] = 2.0


def test_with_aleph_validates(identity_instance):
    assert identity_instance.with_aleph(3).aleph == 3
    with pytest.raises(ValidationError):
        identity_instance.with_aleph(7)


@pytest.mark.parametrize("seed", range(5))
def test_generated_continuous_optimum_leaves_budget_and_caps_slack(seed):
    inst = generate_instance(GenSpec(n=10, seed=seed))
    res = solve_qp(QpProblem.of(inst, range(inst.n)))
    assert res.feasible
    assert float(inst.mu @ res.x) == pytest.approx(inst.rho, rel=1e-6)
    assert res.x.sum() < 1.0 - 1e-3
    assert np.all(res.x < inst.u - 1e-3)


@pytest.mark.parametrize("kwargs, invariant", [
    ({"factor_scale": -0.1}, "gen_factor_scale"),
    ({"rho_fraction": 0.0}, "gen_rho_fraction"),
    ({"rho_fraction": 1.5}, "gen_rho_fraction"),
])
def test_genspec_calibration_knobs_validated(kwargs, invariant):
    with pytest.raises(ValidationError) as err:
        GenSpec(n=5, **kwargs)
    assert err.value.invariant == invariant


def test_smaller_factor_scale_shrinks_off_diagonal():
    loud = generate_instance(GenSpec(n=8, seed=4, factor_scale=1.0))
    quiet = generate_instance(GenSpec(n=8, seed=4, factor_scale=0.05))
    off = ~np.eye(8, dtype=bool)
    assert np.abs(quiet.Q[off]).max() < np.abs(loud.Q[off]).max()
