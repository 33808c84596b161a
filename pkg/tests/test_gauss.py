"""Gaussian density evaluation, sampling, and splittable RNG streams."""

import math

import numpy as np
import pytest
from scipy import stats

from funclust.blinalg import banded_cholesky, dense_cholesky
from funclust.gauss import LOG_2PI, MvnParams, RngStream, log_pdf, sample
from funclust.kernels import Grid, KernelSpec, build_banded, build_covariance


def dense_params(mean, cov):
    return MvnParams(np.asarray(mean, dtype=float), dense_cholesky(np.asarray(cov, dtype=float)))


class TestLogPdf:
    def test_standard_normal_at_zero(self):
        p = dense_params([0.0], [[1.0]])
        assert log_pdf(np.array([0.0]), p) == pytest.approx(-0.9189385, abs=1e-7)

    def test_at_mean_only_normalizer_remains(self):
        cov = np.diag([2.0, 0.5, 1.0])
        mean = np.array([3.0, -1.0, 0.25])
        want = -0.5 * (3 * LOG_2PI + math.log(2.0 * 0.5 * 1.0))
        assert log_pdf(mean, dense_params(mean, cov)) == pytest.approx(want, rel=1e-12)

    def test_two_dim_frozen_value(self):
        # -(m/2) log 2pi - 1/2 log det - 1/2 quad with det = 8, quad = 3/8
        p = dense_params([0.0, 0.0], [[4.0, 2.0], [2.0, 3.0]])
        assert log_pdf(np.array([1.0, 0.0]), p) == pytest.approx(-3.0650978, abs=1e-6)

    def test_matches_scipy_on_random_spd(self):
        rng = np.random.default_rng(17)
        for m in (2, 5, 11):
            a = rng.standard_normal((m, m))
            cov = a @ a.T + m * np.eye(m)
            mean = rng.standard_normal(m)
            y = rng.standard_normal(m)
            want = stats.multivariate_normal.logpdf(y, mean=mean, cov=cov)
            assert log_pdf(y, dense_params(mean, cov)) == pytest.approx(want, rel=1e-10)

    def test_columnwise_matches_per_vector(self):
        rng = np.random.default_rng(3)
        cov = build_covariance(KernelSpec("matern32", 1.0, 0.2), Grid.regular(6))
        p = dense_params(rng.standard_normal(6), cov)
        ys = rng.standard_normal((6, 4))
        batch = log_pdf(ys, p)
        assert batch.shape == (4,)
        for j in range(4):
            assert batch[j] == pytest.approx(log_pdf(ys[:, j], p), rel=1e-12)

    def test_banded_factor_agrees_with_dense(self):
        spec = KernelSpec("matern12", 0.5, 0.1)
        g = Grid.regular(24)
        cov = build_covariance(spec, g)
        banded = build_banded(spec, g, 23)   # full bandwidth: same matrix
        pb = MvnParams(np.zeros(24), banded.cholesky())
        pd_ = dense_params(np.zeros(24), cov)
        rng = np.random.default_rng(5)
        y = rng.standard_normal(24)
        assert log_pdf(y, pb) == pytest.approx(log_pdf(y, pd_), rel=1e-9)


class TestSample:
    def test_deterministic_given_stream(self):
        p = dense_params([1.0, 2.0], [[2.0, 0.3], [0.3, 1.0]])
        a = sample(p, RngStream(42).split("x"))
        b = sample(p, RngStream(42).split("x"))
        np.testing.assert_array_equal(a, b)

    def test_mean_plus_factor_times_noise(self):
        p = dense_params([5.0, -5.0], [[4.0, 0.0], [0.0, 9.0]])
        stream = RngStream(7).split("draw")
        z = RngStream(7).split("draw").gen.standard_normal(2)
        got = sample(p, stream)
        np.testing.assert_allclose(got, p.mean + p.factor.matvec(z), rtol=1e-15)

    def test_empirical_covariance(self):
        cov = np.array([[1.0, 0.6], [0.6, 2.0]])
        p = dense_params([0.0, 0.0], cov)
        stream = RngStream(99)
        draws = np.array([sample(p, stream) for _ in range(100_000)])
        np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.05)
        np.testing.assert_allclose(draws.mean(axis=0), [0.0, 0.0], atol=0.02)

    def test_tiny_variance_concentrates_at_mean(self):
        p = dense_params([3.0, -2.0], 1e-18 * np.eye(2))
        got = sample(p, RngStream(1))
        np.testing.assert_allclose(got, [3.0, -2.0], atol=1e-7)


class TestRngStream:
    def test_same_path_same_draws(self):
        a = RngStream(11).split("chain", "dp_gp", 3).gen.standard_normal(5)
        b = RngStream(11).split("chain", "dp_gp", 3).gen.standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_different_labels_differ(self):
        root = RngStream(11)
        a = root.split("data").gen.standard_normal(5)
        b = root.split("chain").gen.standard_normal(5)
        assert np.max(np.abs(a - b)) > 0

    def test_split_order_and_nesting_equivalent(self):
        one = RngStream(4).split("a", 2, "c")
        two = RngStream(4).split("a").split(2).split("c")
        assert one.path == two.path
        np.testing.assert_array_equal(one.gen.standard_normal(3),
                                      two.gen.standard_normal(3))

    def test_int_and_str_labels_distinct(self):
        a = RngStream(0).split(1)
        b = RngStream(0).split("1")
        assert a.path != b.path

    def test_subseed_deterministic_and_printable(self):
        s = RngStream(20260815).split("data", "iid", 8, 0)
        assert s.subseed() == RngStream(20260815).split("data", "iid", 8, 0).subseed()
        assert 0 <= s.subseed() < 2**32
        assert RngStream(123).subseed() == 123

    def test_label_type_rejected(self):
        with pytest.raises(TypeError):
            RngStream(0).split(1.5)
