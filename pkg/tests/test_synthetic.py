import numpy as np
import pytest

from remplan.estimate import degrade_kernel
from remplan.model import Kernel, check_dominance, check_ifr, tail_sums
from remplan.synthetic import (geometric_ifr_slice, kernels_from_units,
                               random_ifr_slice, shifted_shape_slice,
                               simulate_trajectories)


class TestShiftedShape:
    def test_rows_shift_and_pile_up(self):
        p = shifted_shape_slice(np.array([0.5, 0.3, 0.2]))
        assert np.allclose(p[0], [0.5, 0.3, 0.2])
        assert np.allclose(p[1], [0.0, 0.5, 0.5])
        assert np.allclose(p[2], [0.0, 0.0, 1.0])
        assert check_ifr(Kernel(p), 0)

    def test_rejects_non_distribution(self):
        with pytest.raises(ValueError):
            shifted_shape_slice(np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            shifted_shape_slice(np.array([1.0]))


class TestGeometricSlice:
    def test_valid_and_ifr(self):
        p = geometric_ifr_slice(5, 0.3)
        assert np.allclose(p.sum(axis=1), 1.0)
        assert np.allclose(np.tril(p, -1), 0.0)
        assert check_ifr(Kernel(p), 0)

    def test_advance_domain(self):
        with pytest.raises(ValueError):
            geometric_ifr_slice(5, 0.0)
        with pytest.raises(ValueError):
            geometric_ifr_slice(5, 1.0)


class TestRandomIfrSlice:
    def test_always_valid_ifr(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            n = int(rng.integers(2, 9))
            p = random_ifr_slice(rng, n)
            assert p.shape == (n, n)
            assert np.all(p >= 0.0)
            assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
            assert np.allclose(np.tril(p, -1), 0.0)
            assert check_ifr(Kernel(p), 0)

    def test_worst_state_absorbing(self):
        rng = np.random.default_rng(8)
        p = random_ifr_slice(rng, 6)
        assert p[5, 5] == pytest.approx(1.0)

    def test_spans_the_feasible_set(self):
        # diagonal mass of the first row should roam widely across draws
        rng = np.random.default_rng(10)
        firsts = np.array([random_ifr_slice(rng, 4)[0, 0]
                           for _ in range(300)])
        assert firsts.min() < 0.15
        assert firsts.max() > 0.85


class TestSimulateTrajectories:
    def test_deterministic_and_absorbed(self):
        p = geometric_ifr_slice(4, 0.5)
        a = simulate_trajectories(p, 6, seed=3)
        b = simulate_trajectories(p, 6, seed=3)
        assert a.units == [1, 2, 3, 4, 5, 6]
        for x, y in zip(a.states, b.states):
            assert np.array_equal(x, y)
        for seq in a.states:
            assert seq[0] == 0
            assert seq[-1] == 3
            assert np.all(np.diff(seq) >= 0)

    def test_max_len_caps_slow_walks(self):
        p = np.array([[0.999, 0.001], [0.0, 1.0]])
        t = simulate_trajectories(p, 3, seed=0, max_len=10)
        assert all(len(seq) <= 10 for seq in t.states)


def test_kernels_from_units_is_per_unit():
    p = geometric_ifr_slice(4, 0.5)
    traj = simulate_trajectories(p, 5, seed=2)
    kernels = kernels_from_units(traj, k_max=3, rho=0.05)
    assert len(kernels) == 5
    for kern in kernels:
        assert kern.k_max == 3
        assert kern.num_conditions == 4
    # distinct trajectories should mostly give distinct estimates
    assert any(not np.allclose(kernels[0].p, k.p) for k in kernels[1:])


def test_degrade_of_random_base_keeps_order():
    rng = np.random.default_rng(14)
    base = random_ifr_slice(rng, 6)
    kern = degrade_kernel(base, rho=0.07, k_max=8)
    for k in range(9):
        assert check_ifr(kern, k)
    for k in range(8):
        assert check_dominance(kern.slice(k + 1), kern.slice(k))
    # tail mass strictly grows somewhere once rho > 0
    assert tail_sums(kern.slice(1)).sum() > tail_sums(kern.slice(0)).sum()
