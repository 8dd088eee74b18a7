import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import toeplitz

from lowrank.simulate import (EstimatorSpec, ExperimentConfig, ratio_metric,
                              run_experiment, sample_coefficients,
                              sample_design, sample_response)


class TestSampleDesign:
    def test_uncorrelated_case_has_identity_covariance(self):
        X = sample_design(4000, 8, 0.0, seed=0)
        cov = X.T @ X / 4000
        off = cov[~np.eye(8, dtype=bool)]
        assert np.mean(np.abs(off)) <= 3 / math.sqrt(4000)
        assert np.allclose(np.diag(cov), 1.0, atol=0.15)

    def test_ar1_column_covariance(self):
        rho = 0.7
        X = sample_design(20000, 5, rho, seed=1)
        cov = X.T @ X / 20000
        target = toeplitz(rho ** np.arange(5))
        assert np.allclose(cov, target, atol=0.05)

    @given(rho=st.floats(-0.98, 0.98))
    @settings(max_examples=40, deadline=None)
    def test_any_subunit_rho_accepted(self, rho):
        X = sample_design(5, 12, rho, seed=3)
        assert X.shape == (5, 12)
        assert np.all(np.isfinite(X))

    def test_unit_rho_rejected(self):
        with pytest.raises(ValueError):
            sample_design(10, 4, 1.0, seed=0)

    def test_experiment_one_dimensions_accepted(self):
        for rho in (0.1, 0.5, 0.9):
            X = sample_design(400, 100, rho, seed=4)
            assert X.shape == (400, 100)


class TestSampleCoefficients:
    def test_zero_amplitude_gives_zero_matrix(self):
        A = sample_coefficients(6, 5, 3, 0.0, seed=0)
        assert np.all(A == 0)

    def test_rank_is_exact(self):
        for seed in range(5):
            A = sample_coefficients(8, 7, 3, 1.0, seed=seed)
            assert np.linalg.matrix_rank(A) == 3

    def test_mean_squared_norm(self):
        # E ||b B1 B2||^2 = b^2 * p * r * n
        p, n, r, b = 6, 5, 2, 0.7
        vals = []
        for rng in np.random.default_rng(1).spawn(500):
            z1 = rng.standard_normal((p, r))
            z2 = rng.standard_normal((r, n))
            vals.append(np.sum((b * z1 @ z2) ** 2))
        vals = np.array(vals)
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - b**2 * p * r * n) <= 3 * se

    def test_rank_out_of_range(self):
        with pytest.raises(ValueError):
            sample_coefficients(4, 3, 5, 1.0, seed=0)


class TestSampleResponse:
    def test_noiseless_is_exact(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((7, 4))
        A = rng.standard_normal((4, 3))
        assert np.array_equal(sample_response(X, A, 0.0, seed=0), X @ A)

    def test_shape(self):
        Y = sample_response(np.ones((6, 2)), np.ones((2, 9)), 1.0, seed=1)
        assert Y.shape == (6, 9)

    def test_noise_mean_square(self):
        # E ||Y - XA||^2 = sigma^2 * m * n
        m, n, sigma = 10, 8, 1.3
        X = np.zeros((m, 1))
        A = np.zeros((1, n))
        vals = []
        for i in range(200):
            Y = sample_response(X, A, sigma, seed=1000 + i)
            vals.append(np.sum(Y**2))
        vals = np.array(vals)
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - sigma**2 * m * n) <= 3 * se

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            sample_response(np.ones((3, 2)), np.ones((3, 2)), 1.0, seed=0)


class TestRatioMetric:
    def test_identical_estimates_give_one(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((5, 4))
        b = rng.standard_normal((5, 4))
        assert ratio_metric(a, a, b) == pytest.approx(1.0)

    def test_truncated_at_ten(self):
        truth = np.zeros((3, 3))
        oracle = np.eye(3) * 0.1
        hat = np.eye(3) * 10.0
        assert ratio_metric(hat, oracle, truth) == 10.0

    def test_zero_denominator_flagged_as_nan(self):
        truth = np.zeros((2, 2))
        assert math.isnan(ratio_metric(np.eye(2), truth, truth))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ratio_metric(np.eye(2), np.eye(3), np.eye(3))


class TestConfig:
    def test_json_round_trip(self):
        cfg = ExperimentConfig(
            m=30, p=10, n=8, r_true=2, rho=0.5, b=0.4, replicates=5, seed=3,
            estimators=(EstimatorSpec("kf", K=2.0),
                        EstimatorSpec("rsc", lam=1.5),
                        EstimatorSpec("kf-cv", grid=(1.5, 2.0), folds=3)))
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert again == cfg

    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(m=10, p=4, n=4, r_true=5, rho=0.1, b=1.0)
        with pytest.raises(ValueError):
            ExperimentConfig(m=10, p=4, n=4, r_true=2, rho=1.0, b=1.0)
        with pytest.raises(ValueError, match="unknown"):
            ExperimentConfig.from_dict(
                {"m": 5, "p": 2, "n": 2, "r_true": 1, "rho": 0.0, "b": 1.0,
                 "bogus": 1})

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            ExperimentConfig(m=10, p=4, n=4, r_true=2, rho=0.0, b=1.0,
                             estimators=(EstimatorSpec("kf"), EstimatorSpec("kf")))

    def test_rsc_spec_requires_lambda(self):
        with pytest.raises(ValueError):
            EstimatorSpec("rsc")

    def test_labels(self):
        assert EstimatorSpec("kf", K=2.0).label == "KF[K=2]"
        assert EstimatorSpec("rsci", K=2.5).label == "RSCI[K=2.5]"
        assert EstimatorSpec("rsc", lam=1.0).label == "RSC[lambda=1]"
        assert EstimatorSpec("kf-cv").label == "KF[K=CV]"


class TestRunExperiment:
    def _config(self, **kw):
        base = dict(m=40, p=10, n=10, r_true=3, rho=0.1, b=1.0, sigma=1.0,
                    replicates=10, seed=5,
                    estimators=(EstimatorSpec("kf", K=2.0),
                                EstimatorSpec("rsci", K=2.0)))
        base.update(kw)
        return ExperimentConfig(**base)

    def test_record_bookkeeping(self):
        res = run_experiment(self._config())
        assert len(res.records) == 10 * 2
        for label, s in res.summaries.items():
            assert s.available
            assert s.n == 10
            assert 0 <= s.mean_r_hat <= 10

    def test_deterministic(self):
        a = run_experiment(self._config())
        b = run_experiment(self._config())
        assert [(r.replicate, r.estimator, r.r_hat, r.ratio) for r in a.records] \
            == [(r.replicate, r.estimator, r.r_hat, r.ratio) for r in b.records]

    def test_thread_count_does_not_change_results(self, monkeypatch):
        serial = run_experiment(self._config())
        monkeypatch.setenv("LOWRANK_THREADS", "4")
        threaded = run_experiment(self._config())
        assert [(r.replicate, r.estimator, r.r_hat, r.ratio)
                for r in serial.records] \
            == [(r.replicate, r.estimator, r.r_hat, r.ratio)
                for r in threaded.records]

    def test_strong_signal_concentrates_on_true_rank(self):
        res = run_experiment(self._config(b=2.0, replicates=20))
        for s in res.summaries.values():
            assert abs(s.mean_r_hat - 3) <= 1

    def test_full_row_rank_disables_plugin_variance(self):
        res = run_experiment(self._config(m=8, p=20, n=20, r_true=2,
                                          replicates=5))
        rsci = res.summaries["RSCI[K=2]"]
        assert not rsci.available
        assert "full row rank" in rsci.reason
        kf = res.summaries["KF[K=2]"]
        assert kf.available and kf.n == 5
        assert len(res.records) == 5  # only the available estimator

    def test_mean_rank_monotone_in_signal(self):
        means = []
        for b in (0.05, 0.2, 0.8):
            res = run_experiment(self._config(b=b, replicates=25, seed=11))
            s = res.summaries["KF[K=2]"]
            r_hats = [r.r_hat for r in res.records if r.estimator == s.label]
            se = np.std(r_hats, ddof=1) / math.sqrt(len(r_hats))
            means.append((s.mean_r_hat, se))
        for (lo, se_lo), (hi, se_hi) in zip(means, means[1:]):
            assert hi >= lo - 2 * (se_lo + se_hi)

    def test_oracle_dominance_in_aggregate(self):
        res = run_experiment(self._config(b=0.5, replicates=20))
        for s in res.summaries.values():
            assert s.ratio_median >= 1.0 - 1e-9
