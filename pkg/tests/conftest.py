import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from core.instance import GenSpec, Instance, generate_instance, save_instance  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: oracle suites that take tens of seconds")


def identity(n: int = 3, aleph: int = 1, rho: float = 0.5, u=None) -> Instance:
    """Q = I, μ = e: every optimum is an equal split over ℵ stocks."""
    return Instance(Q=np.eye(n), mu=np.ones(n), rho=rho,
                    u=np.ones(n) if u is None else u, aleph=aleph, name=f"identity{n}")


@pytest.fixture
def identity_instance():
    return identity()


@pytest.fixture
def generated_instance():
    def make(n=8, seed=0, aleph=None, **kwargs):
        return generate_instance(GenSpec(n=n, seed=seed, aleph=aleph, **kwargs))
    return make


@pytest.fixture
def instance_dir(tmp_path):
    """Three generated n=6 instances written as canonical JSON."""
    folder = tmp_path / "instances"
    folder.mkdir()
    for seed in (3, 1, 2):
        inst = generate_instance(GenSpec(n=6, seed=seed, aleph=2))
        save_instance(inst, folder / f"inst-{seed}.json")
    return folder
