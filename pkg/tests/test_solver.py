import numpy as np
import pytest

from remplan.ambiguity import IntervalAmbiguity, KLAmbiguity, kl_divergence
from remplan.estimate import degrade_kernel
from remplan.model import Action, Kernel, ModelSpec
from remplan.solver import (ControlLimits, Solution, check_theorem2_condition,
                            evaluate_policy, extract_control_limits, q_values,
                            robust_value_iteration, stopping_threshold)
from remplan.synthetic import geometric_ifr_slice, random_ifr_slice
from oracles import policy_value_linear, random_affine_model


def test_stopping_threshold():
    assert stopping_threshold(0.9, 1e-6) == pytest.approx(0.1 * 1e-6 / 3.6)
    assert stopping_threshold(0.0, 1e-6) == np.inf


class TestQValues:
    def test_myopic_worst_state(self, cost_model, base_kernel):
        amb = KLAmbiguity(base_kernel, 0.5)
        V = np.zeros((7, 11))
        q = q_values(6, 0, V, cost_model, amb)
        # r(6,0) = 3 - 3 = 0; remanufacture pays c_r; scrap pays c_s
        assert np.allclose(q, [0.0, -2.0, 0.5])

    def test_remanufacture_removed_at_cap(self, cost_model, base_kernel):
        amb = KLAmbiguity(base_kernel, 0.5)
        q = q_values(3, 10, np.zeros((7, 11)), cost_model, amb)
        assert q[1] == -np.inf

    def test_interval_route(self, cost_model, base_kernel):
        amb = IntervalAmbiguity(0.7 * base_kernel.p, base_kernel.p)
        q = q_values(6, 0, np.zeros((7, 11)), cost_model, amb)
        assert np.allclose(q, [0.0, -2.0, 0.5])

    def test_rejects_unknown_ambiguity(self, cost_model):
        with pytest.raises(TypeError):
            q_values(0, 0, np.zeros((7, 11)), cost_model, object())


class TestRobustValueIteration:
    def test_converges_and_satisfies_bellman(self, cost_model, base_kernel):
        amb = KLAmbiguity(base_kernel, 0.5)
        sol = robust_value_iteration(cost_model, amb, epsilon=1e-8)
        assert sol.residual < stopping_threshold(0.9, 1e-8)
        for s in (0, 3, 6):
            for k in (0, 5, 10):
                q = q_values(s, k, sol.values, cost_model, amb)
                assert sol.values[s, k] == pytest.approx(q.max(), abs=1e-6)
                assert sol.policy[s, k] == int(q.argmax())

    def test_no_remanufacture_at_cap(self, cost_model, base_kernel):
        sol = robust_value_iteration(cost_model,
                                     KLAmbiguity(base_kernel, 0.3))
        assert not np.any(sol.policy[:, 10] == Action.REMANUFACTURE)

    def test_worst_kernel_inside_kl_ball(self, cost_model, base_kernel):
        theta = 0.4
        sol = robust_value_iteration(cost_model,
                                     KLAmbiguity(base_kernel, theta))
        for k in range(11):
            for s in range(7):
                div = kl_divergence(sol.worst_kernel.p[k, s],
                                    base_kernel.p[k, s])
                assert div <= theta + 1e-9

    def test_worst_kernel_inside_box(self, cost_model, base_kernel):
        amb = IntervalAmbiguity(0.6 * base_kernel.p, base_kernel.p)
        sol = robust_value_iteration(cost_model, amb)
        assert np.all(sol.worst_kernel.p >= amb.lower - 1e-9)
        assert np.all(sol.worst_kernel.p <= amb.upper + 1e-9)

    def test_more_ambiguity_never_helps(self, cost_model, base_kernel):
        v0 = robust_value_iteration(cost_model,
                                    KLAmbiguity(base_kernel, 0.0)).values
        v1 = robust_value_iteration(cost_model,
                                    KLAmbiguity(base_kernel, 1.0)).values
        assert np.all(v1 <= v0 + 1e-9)

    def test_ties_prefer_wait_over_scrap(self):
        # beta = 0: at s = 0 waiting and scrapping both pay exactly 1
        m = ModelSpec.from_affine(3, 1, 1.0, 0.0, 0.25, 5.0, 1.0, 0.0)
        kern = degrade_kernel(geometric_ifr_slice(3, 0.4), k_max=1)
        sol = robust_value_iteration(m, KLAmbiguity(kern, 0.0))
        assert sol.policy[0, 0] == Action.WAIT
        assert sol.policy[1, 0] == Action.SCRAP

    def test_ties_prefer_remanufacture_over_scrap(self):
        # c_r = c_s = 0 and worthless waiting: both repairs pay 0
        m = ModelSpec.from_affine(3, 2, -1.0, 0.1, 0.1, 0.0, 0.0, 0.0)
        kern = degrade_kernel(geometric_ifr_slice(3, 0.4), k_max=2)
        sol = robust_value_iteration(m, KLAmbiguity(kern, 0.0))
        assert sol.policy[2, 0] == Action.REMANUFACTURE
        assert sol.policy[2, 2] == Action.SCRAP

    def test_iteration_guard(self, cost_model, base_kernel):
        with pytest.raises(RuntimeError, match="no convergence"):
            robust_value_iteration(cost_model, KLAmbiguity(base_kernel, 0.1),
                                   max_iter=2)

    def test_rejects_mismatched_lattice(self, cost_model):
        kern = degrade_kernel(geometric_ifr_slice(3, 0.4), k_max=10)
        with pytest.raises(ValueError, match="lattice|does not match"):
            robust_value_iteration(cost_model, KLAmbiguity(kern, 0.1))

    def test_solution_to_dict_keys(self, cost_model, base_kernel):
        sol = robust_value_iteration(cost_model, KLAmbiguity(base_kernel, 0.2))
        d = sol.to_dict()
        assert set(d) == {"values", "policy", "worst_kernel", "iterations",
                          "residual"}


def _fake_solution(policy):
    policy = np.asarray(policy)
    return Solution(np.zeros(policy.shape), policy,
                    Kernel(np.eye(policy.shape[0])), 1, 0.0)


class TestControlLimits:
    def test_reads_thresholds(self):
        pol = np.array([
            [0, 0, 0],
            [0, 0, 0],
            [1, 0, 0],
            [1, 2, 2],
        ])
        cl = extract_control_limits(_fake_solution(pol))
        assert cl.k_star == 1
        assert cl.zeta_rm == [2, None, None]
        assert cl.zeta_scrap == [None, 3, 3]
        assert cl.is_control_limit
        assert cl.is_monotone_in_k

    def test_flags_non_control_limit(self):
        pol = np.array([
            [0, 0],
            [2, 0],
            [0, 2],   # wait above a scrap row breaks the single switch
            [2, 2],
        ])
        cl = extract_control_limits(_fake_solution(pol))
        assert not cl.is_control_limit

    def test_flags_threshold_inversion_in_k(self):
        pol = np.array([
            [0, 0, 0],
            [1, 0, 0],
            [1, 2, 0],   # scrap threshold rises from k=1 to k=2
            [1, 2, 2],
        ])
        cl = extract_control_limits(_fake_solution(pol))
        assert cl.is_control_limit
        assert not cl.is_monotone_in_k

    def test_warns_when_cap_binds(self):
        pol = np.array([
            [0, 0],
            [1, 2],
            [1, 2],
        ])
        with pytest.warns(UserWarning, match="cap may be binding"):
            extract_control_limits(_fake_solution(pol))

    def test_csv_blanks_for_none(self, tmp_path):
        cl = ControlLimits(1, [2, None], [None, 3], True, True)
        path = tmp_path / "cl.csv"
        cl.to_csv(path)
        assert path.read_text() == "k,zeta_rm,zeta_scrap\n0,2,\n1,,3\n"


class TestEvaluatePolicy:
    def test_hand_two_state(self):
        m = ModelSpec.from_affine(2, 0, 2.0, 0.0, 1.0, 1.0, 0.5, 0.5)
        kern = Kernel(np.array([[0.6, 0.4], [0.0, 1.0]]))
        pol = np.array([[0], [2]])
        V = evaluate_policy(pol, kern, m)
        # V(1) = c_s; V(0) = 2 + 0.5*(0.6 V(0) + 0.4 * 0.5)
        v0 = (2.0 + 0.5 * 0.4 * 0.5) / (1.0 - 0.5 * 0.6)
        assert V[1, 0] == pytest.approx(0.5, abs=1e-9)
        assert V[0, 0] == pytest.approx(v0, abs=1e-9)

    def test_matches_linear_solve(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            n = int(rng.integers(3, 6))
            kmax = int(rng.integers(1, 4))
            m = random_affine_model(rng, n, kmax)
            kern = degrade_kernel(random_ifr_slice(rng, n), rho=0.07,
                                  k_max=kmax)
            pol = rng.integers(0, 3, size=(n, kmax + 1))
            pol[:, kmax] = np.where(pol[:, kmax] == 1, 0, pol[:, kmax])
            V = evaluate_policy(pol, kern, m)
            assert np.allclose(V, policy_value_linear(pol, kern, m), atol=1e-8)

    def test_rejects_remanufacture_at_cap(self, cost_model, base_kernel):
        pol = np.zeros((7, 11), dtype=int)
        pol[0, 10] = 1
        with pytest.raises(ValueError, match="not available"):
            evaluate_policy(pol, base_kernel, cost_model)

    def test_rejects_bad_shapes(self, cost_model, base_kernel):
        with pytest.raises(ValueError):
            evaluate_policy(np.zeros((3, 3), dtype=int), base_kernel,
                            cost_model)
        with pytest.raises(ValueError):
            evaluate_policy(np.full((7, 11), 5), base_kernel, cost_model)


class TestTheorem2Condition:
    def test_restrictive_on_flat_decrements(self, cost_model):
        # beta r(0,0)/(1-beta) - beta c_s = 27 - 0.45 = 26.55 > a1 = 0.5
        holds = check_theorem2_condition(cost_model)
        assert holds.shape == (7, 10)
        assert not holds.any()

    def test_holds_for_steep_decrements(self):
        m = ModelSpec.from_affine(3, 2, 50.0, 30.0, 1.0, 1.0, 0.5, 0.1)
        holds = check_theorem2_condition(m)
        assert holds.shape == (3, 2)
        assert holds.all()
