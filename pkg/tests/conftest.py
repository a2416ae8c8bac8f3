"""Shared fixtures.

The compiled numerical cores are exercised once per session up front, so tests
with wall-clock budgets never pay JIT or cache-load latency.
"""
import numpy as np
import pytest

from remplan import _core
from remplan.estimate import degrade_kernel
from remplan.model import ModelSpec
from remplan.synthetic import geometric_ifr_slice


@pytest.fixture(scope="session", autouse=True)
def warm_compiled_cores():
    p = np.array([0.6, 0.4])
    v = np.array([1.0, 0.0])
    _core.kl_row_solve(p, v, 0.1)

    lo = np.array([0.1, 0.1, 0.2])
    up = np.array([0.6, 0.5, 0.8])
    w = np.array([3.0, 2.0, 1.0])
    _core.interval_row_greedy(lo, up, w)
    _core.interval_row_dual(lo, up, w)

    model = ModelSpec.from_affine(3, 2, 2.0, 0.3, 0.3, 1.0, 0.5, 0.8)
    kern = degrade_kernel(geometric_ifr_slice(3, 0.4), k_max=2)
    r = np.ascontiguousarray(model.reward)
    theta = np.full((3, 3), 0.1)
    thr = (1.0 - 0.8) * 1e-6 / (4.0 * 0.8)
    _core.vi_kl(kern.p, r, theta, 0.8, 1.0, 0.5, thr, 10 ** 6)
    _core.vi_interval(0.5 * kern.p, kern.p.copy(), r, 0.8, 1.0, 0.5,
                      thr, 10 ** 6)

    pol = np.zeros((3, 3), dtype=np.int64)
    pol[2, :] = 2
    _core.eval_policy(pol, kern.p, r, 0.8, 1.0, 0.5, 1e-10, 10 ** 6)


@pytest.fixture(scope="session")
def cost_model():
    # 7 condition states, linear gain/upkeep, the configuration every demo uses
    return ModelSpec.from_affine(7, 10, 3.0, 0.5, 0.5, 2.0, 0.5, 0.9)


@pytest.fixture(scope="session")
def base_slice():
    return geometric_ifr_slice(7, 0.3)


@pytest.fixture(scope="session")
def base_kernel(base_slice):
    return degrade_kernel(base_slice, rho=0.07, k_max=10)
