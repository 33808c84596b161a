"""Partition point estimates, VI distance, and posterior mean curves."""

import math
from dataclasses import dataclass

import numpy as np
import pytest

from funclust.kernels import Grid, KernelSpec, build_covariance
from funclust.sampler import ChainTrace, SamplerConfig
from funclust.summarize import (
    estimate_cluster_means,
    posterior_mean_hyperparams,
    posterior_mean_k,
    variation_of_information,
    vi_point_estimate,
)


def make_trace(z_draws, config=None, grid=None, tau_y2=1.0, tau_mu2=1.0,
               nu=0.5, ell_y=0.1, ell_mu=0.15):
    z = np.asarray(z_draws, dtype=np.int16)
    t = z.shape[0]
    const = lambda v: np.full(t, float(v))
    return ChainTrace(
        z_draws=z,
        k_draws=(z.max(axis=1) + 1).astype(np.int64),
        tau_y2=const(tau_y2), tau_mu2=const(tau_mu2),
        nu=const(nu), ell_y=const(ell_y), ell_mu=const(ell_mu),
        config=config or SamplerConfig(error_kind="iid"),
        grid=grid or Grid.regular(4),
        burn_in=0, iterations=t, wall_seconds=0.0,
    )


@dataclass
class FakeData:
    y: np.ndarray


class TestVariationOfInformation:
    def test_identical_is_zero(self):
        z = np.array([0, 0, 1, 2, 2, 1])
        assert variation_of_information(z, z) == 0.0
        assert variation_of_information(z, (z + 1) % 3) == 0.0

    def test_independent_binary_splits(self):
        got = variation_of_information([0, 0, 1, 1], [0, 1, 0, 1])
        assert got == pytest.approx(math.log(4.0), rel=1e-12)

    def test_singletons_vs_lump_is_log_n(self):
        n = 7
        got = variation_of_information(np.arange(n), np.zeros(n, int))
        assert got == pytest.approx(math.log(n), rel=1e-12)

    def test_symmetry_and_triangle_fuzz(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            n = int(rng.integers(2, 11))
            a = rng.integers(0, 3, size=n)
            b = rng.integers(0, 3, size=n)
            c = rng.integers(0, 3, size=n)
            ab = variation_of_information(a, b)
            assert ab == pytest.approx(variation_of_information(b, a), abs=1e-12)
            assert ab >= 0.0
            assert ab <= variation_of_information(a, c) + \
                variation_of_information(c, b) + 1e-12

    def test_input_validation(self):
        with pytest.raises(ValueError):
            variation_of_information([0, 1], [0])
        with pytest.raises(ValueError):
            variation_of_information([], [])


class TestPosteriorMeanK:
    def test_average_of_occupied_counts(self):
        trace = make_trace([[0, 0, 1, 1], [0, 1, 2, 1], [0, 1, 2, 1]])
        assert posterior_mean_k(trace) == pytest.approx(8.0 / 3.0, rel=1e-15)


class TestViPointEstimate:
    def test_majority_draw_wins(self):
        p = [0, 0, 1, 1]
        q = [0, 1, 0, 1]
        trace = make_trace([p, p, q])
        np.testing.assert_array_equal(vi_point_estimate(trace), p)

    def test_single_draw_returned_canonical(self):
        trace = make_trace([[2, 2, 0, 1]])
        np.testing.assert_array_equal(vi_point_estimate(trace), [0, 0, 1, 2])

    def test_relabeled_duplicates_count_together(self):
        # three encodings of {01}{23} outvote two copies of {02}{13}
        trace = make_trace([[0, 0, 1, 1], [1, 1, 0, 0], [0, 0, 1, 1],
                            [0, 1, 0, 1], [0, 1, 0, 1]])
        np.testing.assert_array_equal(vi_point_estimate(trace), [0, 0, 1, 1])

    def test_never_worse_than_any_draw(self):
        rng = np.random.default_rng(77)
        for _ in range(20):
            t, n = int(rng.integers(2, 8)), int(rng.integers(3, 9))
            z = rng.integers(0, 3, size=(t, n))
            trace = make_trace(z)
            est = vi_point_estimate(trace)
            exp_vi = lambda c: np.mean(
                [variation_of_information(c, zi) for zi in z])
            best_draw = min(exp_vi(zi) for zi in z)
            assert exp_vi(est) <= best_draw + 1e-10


class TestPosteriorMeanHyperparams:
    def test_conventions(self):
        trace = make_trace([[0, 0]] * 4)
        trace.tau_y2[:] = [1.0, 2.0, 3.0, 6.0]
        trace.tau_mu2[:] = [0.5, 0.5, 1.0, 2.0]
        trace.ell_y[:] = [0.1, 0.1, 0.4, 0.1]
        trace.ell_mu[:] = [0.2, 0.8, 0.2, 0.2]
        trace.nu[:] = [0.5, 1.5, 1.5, 2.5]
        hp = posterior_mean_hyperparams(trace)
        assert hp["tau_y2"] == pytest.approx(3.0)
        assert hp["tau_mu2"] == pytest.approx(1.0)
        assert hp["ell_y"] == pytest.approx((0.1 ** 3 * 0.4) ** 0.25, rel=1e-12)
        assert hp["ell_mu"] == pytest.approx((0.2 ** 3 * 0.8) ** 0.25, rel=1e-12)
        assert hp["nu"] == 1.5


class TestEstimateClusterMeans:
    def test_flat_prior_limit_is_pointwise_average(self):
        rng = np.random.default_rng(5)
        y = rng.standard_normal((6, 4))
        z = np.array([0, 0, 0, 1, 1, 1])
        trace = make_trace([z], tau_y2=1.0, tau_mu2=1e6)
        got = estimate_cluster_means(trace, FakeData(y), z)
        np.testing.assert_allclose(got[0], y[:3].mean(axis=0), atol=1e-3)
        np.testing.assert_allclose(got[1], y[3:].mean(axis=0), atol=1e-3)

    def test_zero_data_gives_zero_curves(self):
        z = np.zeros(5, dtype=int)
        trace = make_trace([z])
        got = estimate_cluster_means(trace, FakeData(np.zeros((5, 4))), z)
        np.testing.assert_array_equal(got, np.zeros((1, 4)))

    def test_matches_dense_conjugate_formula(self):
        # independent oracle: C_m (C_y + n_k C_m)^{-1} sum(y), dense algebra
        rng = np.random.default_rng(13)
        grid = Grid.regular(4)
        y = rng.standard_normal((5, 4))
        z = np.array([0, 0, 1, 1, 1])
        trace = make_trace([z], tau_y2=0.3, tau_mu2=2.0, ell_mu=0.25,
                           grid=grid)
        got = estimate_cluster_means(trace, FakeData(y), z)
        cy = 0.3 * build_covariance(KernelSpec("iid", 1.0), grid)
        cm = 2.0 * build_covariance(KernelSpec("se", 1.0, 0.25), grid)
        for k, n_k in ((0, 2), (1, 3)):
            y_sum = y[z == k].sum(axis=0)
            want = cm @ np.linalg.solve(cy + n_k * cm, y_sum)
            np.testing.assert_allclose(got[k], want, atol=1e-10)

    def test_gap_in_labels_rejected(self):
        z = np.array([0, 0, 2, 2])
        trace = make_trace([z])
        with pytest.raises(ValueError):
            estimate_cluster_means(trace, FakeData(np.zeros((4, 4))), z)
