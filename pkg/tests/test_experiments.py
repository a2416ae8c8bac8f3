import warnings

import numpy as np
import pytest

from remplan.estimate import degrade_kernel
from remplan.experiments import (INTERVAL_DEFAULT_GRID, KL_DEFAULT_GRID,
                                 ExperimentConfig, ExperimentReport,
                                 ViolationRanges, impact_experiment,
                                 out_of_sample_eval, reliability,
                                 select_psi_reliability,
                                 select_psi_validation, violation_study)
from remplan.ingest import TrajectorySet
from remplan.model import ModelSpec
from remplan.solver import evaluate_policy
from remplan.synthetic import geometric_ifr_slice, simulate_trajectories


@pytest.fixture(scope="module")
def small_model():
    return ModelSpec.from_affine(4, 3, 3.0, 0.5, 0.8, 2.0, 0.5, 0.85)


@pytest.fixture(scope="module")
def small_slice():
    return geometric_ifr_slice(4, 0.35)


def _cfg(**kw):
    base = dict(family="kl", psi_grid=(0.0, 0.5), train_size=3, test_size=4,
                replications=3, bootstrap_samples=6, seed=0, k_max=3)
    base.update(kw)
    return ExperimentConfig(**base)


class TestExperimentConfig:
    def test_default_grids(self):
        assert ExperimentConfig(family="kl", k_max=3).psi_grid == KL_DEFAULT_GRID
        assert (ExperimentConfig(family="interval", k_max=3).psi_grid
                == INTERVAL_DEFAULT_GRID)

    def test_kl_grid_must_ascend(self):
        with pytest.raises(ValueError, match="ascending"):
            _cfg(psi_grid=(0.5, 0.2))
        with pytest.raises(ValueError, match="ascending"):
            _cfg(psi_grid=(-0.1, 0.5))

    def test_interval_grid_must_descend(self):
        with pytest.raises(ValueError, match="descending"):
            _cfg(family="interval", psi_grid=(0.1, 0.9))
        with pytest.raises(ValueError):
            _cfg(family="interval", psi_grid=(1.2, 0.5))

    def test_gamma_open_interval(self):
        with pytest.raises(ValueError, match="gamma"):
            _cfg(gamma=0.0)
        with pytest.raises(ValueError, match="gamma"):
            _cfg(gamma=1.0)

    def test_family_and_eval_mode(self):
        with pytest.raises(ValueError, match="family"):
            _cfg(family="wasserstein")
        with pytest.raises(ValueError, match="eval_mode"):
            _cfg(eval_mode="nope")


def test_reliability_counts_successes():
    recs = [{"success": True}, {"success": False}, {"success": True},
            {"success": True}]
    assert reliability(recs) == pytest.approx(0.75)


class TestOutOfSampleEval:
    def test_mean_over_kernels(self, small_model, small_slice):
        kernels = [degrade_kernel(small_slice, k_max=3),
                   degrade_kernel(geometric_ifr_slice(4, 0.6), k_max=3)]
        pol = np.zeros((4, 4), dtype=int)
        pol[3] = 2
        vals = [evaluate_policy(pol, k, small_model, epsilon=1e-8)[0, 0]
                for k in kernels]
        got = out_of_sample_eval(pol, kernels, small_model)
        assert got == pytest.approx(np.mean(vals), abs=1e-9)

    def test_repeated_object_shortcut_matches(self, small_model, small_slice):
        kern = degrade_kernel(small_slice, k_max=3)
        pol = np.zeros((4, 4), dtype=int)
        pol[3] = 2
        single = out_of_sample_eval(pol, [kern], small_model)
        many = out_of_sample_eval(pol, [kern] * 7, small_model)
        assert many == pytest.approx(single, abs=1e-12)

    def test_rejects_empty(self, small_model):
        with pytest.raises(ValueError):
            out_of_sample_eval(np.zeros((4, 4), dtype=int), [], small_model)


class TestImpactExperiment:
    def test_synthetic_per_unit_shape_and_monotone(self, small_model,
                                                   small_slice):
        cfg = _cfg(psi_grid=(0.0, 0.3, 1.0), replications=4)
        rep = impact_experiment(small_model, cfg, true_kernel=small_slice)
        assert len(rep.records) == 12
        for r in range(4):
            ins = [x["in_sample"] for x in rep.sorted_records()
                   if x["replication"] == r]
            assert all(b <= a + 1e-9 for a, b in zip(ins, ins[1:]))

    def test_truth_mode_ignores_test_size(self, small_model, small_slice):
        # the truth kernel is scored once and averaged, so the test-sample
        # count cannot change any record
        a = impact_experiment(small_model,
                              _cfg(eval_mode="truth", test_size=1),
                              true_kernel=small_slice)
        b = impact_experiment(small_model,
                              _cfg(eval_mode="truth", test_size=50),
                              true_kernel=small_slice)
        assert len(a.records) == len(b.records)
        for ra, rb in zip(a.records, b.records):
            assert (ra["psi"], ra["replication"]) == (rb["psi"], rb["replication"])
            assert ra["in_sample"] == rb["in_sample"]
            assert ra["success"] == rb["success"]
            # averaging 50 copies instead of 1 may move the last couple ulps
            assert abs(ra["out_sample"] - rb["out_sample"]) < 1e-12

    def test_deterministic_and_thread_invariant(self, small_model,
                                                small_slice):
        cfg1 = _cfg(replications=4)
        cfg2 = _cfg(replications=4, threads=3)
        a = impact_experiment(small_model, cfg1, true_kernel=small_slice)
        b = impact_experiment(small_model, cfg1, true_kernel=small_slice)
        c = impact_experiment(small_model, cfg2, true_kernel=small_slice)
        assert a.records == b.records
        assert a.records == c.records

    def test_data_mode_splits_units(self, small_model, small_slice):
        traj = simulate_trajectories(small_slice, 10, seed=5)
        cfg = _cfg(replications=2)
        rep = impact_experiment(small_model, cfg, trajectories=traj)
        assert len(rep.records) == 4

    def test_input_validation(self, small_model, small_slice):
        traj = simulate_trajectories(small_slice, 4, seed=1)
        with pytest.raises(ValueError, match="exactly one"):
            impact_experiment(small_model, _cfg())
        with pytest.raises(ValueError, match="exactly one"):
            impact_experiment(small_model, _cfg(), true_kernel=small_slice,
                              trajectories=traj)
        with pytest.raises(ValueError, match="true kernel"):
            impact_experiment(small_model, _cfg(eval_mode="truth"),
                              trajectories=traj)
        with pytest.raises(ValueError, match="not enough units"):
            impact_experiment(small_model, _cfg(train_size=3, test_size=4),
                              trajectories=traj)

    def test_interval_family_runs_nested(self, small_model, small_slice):
        cfg = _cfg(family="interval", psi_grid=(0.8, 0.4, 0.1),
                   replications=3, train_size=4)
        rep = impact_experiment(small_model, cfg, true_kernel=small_slice)
        assert len(rep.records) == 9
        for r in range(3):
            ins = [x["in_sample"] for x in rep.sorted_records()
                   if x["replication"] == r]
            # sorted_records orders by psi ascending = ambiguity descending
            assert all(a <= b + 1e-9 for a, b in zip(ins, ins[1:]))


class TestExperimentReport:
    def test_summaries_and_csv(self, small_model, small_slice, tmp_path):
        cfg = _cfg(replications=3)
        rep = impact_experiment(small_model, cfg, true_kernel=small_slice)
        for psi in cfg.psi_grid:
            assert 0.0 <= rep.reliability(psi) <= 1.0
            assert np.isfinite(rep.mean_in_sample(psi))
            assert np.isfinite(rep.mean_out_of_sample(psi))
        path = tmp_path / "report.csv"
        rep.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "psi,replication,in_sample,out_sample,success"
        assert len(lines) == 1 + len(rep.records)
        assert lines[1].split(",")[0] == "0.0"
        assert lines[1].split(",")[4] in ("0", "1")
        d = rep.to_dict()
        assert {"config", "summary", "records", "chosen_psi", "notes"} <= set(d)


def _degenerate_trajectories(n=6):
    # every unit jumps 0 -> 3 immediately: the estimated kernel is a point
    # mass, so every ambiguity size yields the same policy
    return TrajectorySet(list(range(1, n + 1)),
                         [np.array([0, 3])] * n, 4)


class TestSelection:
    def test_validation_tie_breaks_to_smaller_psi(self, small_model):
        cfg = _cfg(psi_grid=(0.2, 0.7, 1.5), train_size=6)
        psi, sol = select_psi_validation(_degenerate_trajectories(), small_model,
                                         cfg)
        assert psi == 0.2
        assert sol.values.shape == (4, 4)

    def test_reliability_target_met_takes_smallest(self, small_model):
        cfg = _cfg(psi_grid=(0.1, 0.9), train_size=6, gamma=0.7,
                   bootstrap_samples=4)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            psi, sol = select_psi_reliability(_degenerate_trajectories(),
                                              small_model, cfg)
        assert psi == 0.1
        assert sol.values.shape == (4, 4)

    def test_tiny_gamma_needs_one_success(self, small_model):
        cfg = _cfg(psi_grid=(0.1, 0.9), train_size=6, gamma=1e-6,
                   bootstrap_samples=4)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            psi, _ = select_psi_reliability(_degenerate_trajectories(),
                                            small_model, cfg)
        assert psi == 0.1


class TestViolationStudy:
    def test_point_ranges_give_known_outcome(self):
        pt = lambda x: (x, x)
        ranges = ViolationRanges(a0=pt(12.0), a1=pt(2.0), a2=pt(2.0),
                                 c_r=pt(1.0), c_s=pt(1.0), theta=pt(1.0),
                                 beta=pt(0.5))
        s = violation_study(num_instances=5, ranges=ranges, seed=0,
                            num_conditions=7, k_max=4)
        assert s.num_instances == 5
        # beta r(0,0)/(1-beta) - beta c_s = 11.5 > a1 = 2: condition violated
        assert s.condition_violated == 5
        assert 0 <= s.structure_broken_given_violated <= 5
        assert 0.0 <= s.break_fraction_given_violated <= 1.0

    def test_deterministic_across_threads(self):
        a = violation_study(num_instances=12, seed=3, num_conditions=5,
                            k_max=3, threads=1)
        b = violation_study(num_instances=12, seed=3, num_conditions=5,
                            k_max=3, threads=3)
        assert a == b

    def test_rejection_respects_salvage_condition(self):
        s = violation_study(num_instances=10, seed=1, num_conditions=5,
                            k_max=3)
        assert s.num_instances == 10
        assert s.resampled >= 0
