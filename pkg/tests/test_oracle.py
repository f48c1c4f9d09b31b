import csv
import math

import numpy as np
import pytest

from nmvmrisk import GIG, Degenerate, MultivariateNMVM
from nmvmrisk.allocation import CapitalAllocator
from nmvmrisk.errors import EmptyTail, FactorisationFailure, NumericalWarning
from nmvmrisk.oracle import (
    SampleBatch,
    TailSample,
    ValidationRow,
    empirical_tail_functional,
    functional,
    psd_cholesky,
    sample_nmvm,
    validation_report,
    write_batch_csv,
)

from oracles import normal_tail


@pytest.fixture(scope="module")
def gaussian_batch(gaussian_portfolio):
    return sample_nmvm(gaussian_portfolio, 10**6, 123)


class TestFactorisation:
    def test_positive_definite(self):
        sigma = np.array([[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]])
        L = psd_cholesky(sigma)
        np.testing.assert_allclose(L @ L.T, sigma, rtol=1e-14)
        assert np.allclose(L, np.tril(L))

    def test_semidefinite(self):
        v = np.array([1.0, 2.0, -1.0])
        sigma = np.outer(v, v) + np.diag([0.0, 0.0, 0.0])
        L = psd_cholesky(sigma)
        np.testing.assert_allclose(L @ L.T, sigma, atol=1e-14)

    def test_indefinite(self):
        with pytest.raises(FactorisationFailure):
            psd_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestSampling:
    def test_shapes_and_positivity(self, gig_portfolio):
        batch = sample_nmvm(gig_portfolio, 1000, 1)
        assert batch.draws.shape == (1000, 3)
        assert batch.thetas.shape == (1000,)
        assert (batch.thetas > 0).all()
        assert (batch.seed, batch.count) == (1, 1000)
        np.testing.assert_array_equal(batch.aggregate, batch.draws.sum(axis=1))

    def test_count_must_be_positive(self, gig_portfolio):
        with pytest.raises(ValueError):
            sample_nmvm(gig_portfolio, 0, 1)

    def test_deterministic(self, gig_portfolio):
        a = sample_nmvm(gig_portfolio, 5000, 42, chunk_size=1024)
        b = sample_nmvm(gig_portfolio, 5000, 42, chunk_size=1024)
        np.testing.assert_array_equal(a.draws, b.draws)
        np.testing.assert_array_equal(a.thetas, b.thetas)

    def test_prefix_is_stable_across_counts(self, gig_portfolio):
        a = sample_nmvm(gig_portfolio, 3000, 42, chunk_size=1000)
        b = sample_nmvm(gig_portfolio, 5000, 42, chunk_size=1000)
        np.testing.assert_array_equal(a.draws, b.draws[:3000])

    def test_seed_matters(self, gig_portfolio):
        assert not np.array_equal(sample_nmvm(gig_portfolio, 100, 1).draws, sample_nmvm(gig_portfolio, 100, 2).draws)

    def test_gaussian_moments(self):
        sigma = np.array([[1.0, 0.3], [0.3, 2.0]])
        m = MultivariateNMVM([0.5, -1.0], [0.0, 0.0], sigma, Degenerate(1.0))
        x = sample_nmvm(m, 10**6, 7).draws
        n = x.shape[0]
        se_mean = x.std(axis=0, ddof=1) / math.sqrt(n)
        assert (np.abs(x.mean(axis=0) - m.mu) < 4 * se_mean).all()
        d = x - x.mean(axis=0)
        for i in range(2):
            for j in range(2):
                prod = d[:, i] * d[:, j]
                assert abs(prod.mean() - sigma[i, j]) < 4 * prod.std(ddof=1) / math.sqrt(n)

    def test_gig_mean(self, gig_portfolio):
        x = sample_nmvm(gig_portfolio, 10**6, 8).draws
        expected = gig_portfolio.mu + gig_portfolio.mixing.moment(1) * gig_portfolio.gamma
        se = x.std(axis=0, ddof=1) / math.sqrt(x.shape[0])
        assert (np.abs(x.mean(axis=0) - expected) < 4 * se).all()

    def test_csv_dump(self, gig_portfolio, tmp_path):
        batch = sample_nmvm(gig_portfolio, 20, 3)
        path = tmp_path / "batch.csv"
        write_batch_csv(batch, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x1", "x2", "x3", "theta"]
        back = np.array(rows[1:], dtype=float)
        np.testing.assert_array_equal(back[:, :3], batch.draws)
        np.testing.assert_array_equal(back[:, 3], batch.thetas)
        assert b"\r\n" not in path.read_bytes()


class TestFunctionals:
    def test_unknown(self):
        with pytest.raises(ValueError, match="unknown functional"):
            functional("var", k=1)

    def test_missing_argument(self):
        with pytest.raises(ValueError, match="needs argument i"):
            functional("tcm_alloc", k=3)

    def test_first_central_moment(self, gaussian_batch):
        est = empirical_tail_functional(gaussian_batch, 0.95, "tcm", k=1)
        assert abs(est.value) <= 1e-12

    def test_standard_normal_cte(self):
        m = MultivariateNMVM([0.0], [0.0], [[1.0]], Degenerate(1.0))
        est = empirical_tail_functional(sample_nmvm(m, 10**6, 5), 0.95, "tm", k=1)
        assert abs(est.value - 2.0627128) < 4 * est.std_error
        assert est.value == pytest.approx(normal_tail(0.0, 1.0, 0.95)["cte"], rel=0.01)

    def test_threshold_is_order_statistic(self):
        S = np.arange(1.0, 101.0)
        batch = SampleBatch(S[:, None], np.ones(100), 0, 100)
        tail = TailSample(batch, 0.95, n_batches=2)
        # ceil(0.95 * 100) = 95th smallest is 95, so the tail is 96..100
        np.testing.assert_array_equal(tail.full[1], [96.0, 97.0, 98.0, 99.0, 100.0])

    def test_empty_tail(self):
        batch = SampleBatch(np.ones((100, 2)), np.ones(100), 0, 100)
        with pytest.raises(EmptyTail):
            empirical_tail_functional(batch, 0.95, "tm", k=1)

    def test_small_tail_warns(self, gig_portfolio):
        batch = sample_nmvm(gig_portfolio, 1000, 4)
        with pytest.warns(NumericalWarning, match="tail draws"):
            est = empirical_tail_functional(batch, 0.95, "tm", k=1)
        assert est.tail_count == 50 and est.warning

    def test_too_few_draws_for_batches(self, gig_portfolio):
        with pytest.raises(ValueError):
            TailSample(sample_nmvm(gig_portfolio, 10, 1), 0.5, n_batches=50)

    def test_empirical_full_allocation(self, gaussian_batch):
        tail = TailSample(gaussian_batch, 0.95)
        total_cte = tail.estimate(functional("tm", k=1)).value
        total_tv = tail.estimate(functional("tcm", k=2)).value
        total_tcm = tail.estimate(functional("tcm", k=3)).value
        cte = sum(tail.estimate(functional("cte_alloc", i=i)).value for i in range(3))
        tv = sum(tail.estimate(functional("tv_alloc", i=i)).value for i in range(3))
        tcm = sum(tail.estimate(functional("tcm_alloc", i=i, k=3)).value for i in range(3))
        assert cte == pytest.approx(total_cte, rel=1e-12)
        assert tv == pytest.approx(total_tv, rel=1e-12)
        assert tcm == pytest.approx(total_tcm, rel=1e-10)

    def test_standard_error_scaling(self, gig_portfolio):
        names = [("tm", dict(k=1)), ("cte_alloc", dict(i=0)), ("tv_alloc", dict(i=1))]
        ratios = []
        for name, kw in names:
            small, large = [], []
            for seed in range(6):
                small.append(empirical_tail_functional(sample_nmvm(gig_portfolio, 200_000, seed), 0.95, name, **kw).std_error)
                large.append(empirical_tail_functional(sample_nmvm(gig_portfolio, 400_000, 100 + seed), 0.95, name, **kw).std_error)
            ratios.append(np.mean(large) / np.mean(small))
        assert all(0.6 <= r <= 0.85 for r in ratios), ratios


class TestValidationReport:
    def test_gaussian_passes(self, gaussian_portfolio, gaussian_batch):
        rows = validation_report(gaussian_portfolio, [0.95, 0.99], 4, 10**6, 123, batch=gaussian_batch)
        assert len(rows) == 2 * (4 + 4 + 3 + 3 + 3 + 6)
        bad = [(r.alpha, r.quantity, round(r.z, 2)) for r in rows if r.flagged]
        assert not bad

    def test_row_names(self, gaussian_portfolio, gaussian_batch):
        rows = validation_report(gaussian_portfolio, [0.95], 2, 10**6, 123, batch=gaussian_batch)
        names = [r.quantity for r in rows]
        assert names[:4] == ["tm_1", "tm_2", "tcm_1", "tcm_2"]
        assert "tcm_alloc_3_3" in names and "cross_moment_1_3" in names

    def test_corrupted_analytic_is_flagged(self, gaussian_portfolio, gaussian_batch):
        rows = validation_report(gaussian_portfolio, [0.95], 2, 10**6, 123, analytic_bias=0.05, batch=gaussian_batch)
        assert any(r.flagged for r in rows)

    def test_replay_is_identical(self, gig_portfolio):
        a = validation_report(gig_portfolio, [0.95], 2, 20_000, 9, chunk_size=4096)
        b = validation_report(gig_portfolio, [0.95], 2, 20_000, 9, chunk_size=4096)
        assert a == b

    def test_zero_quantity_uses_roundoff_floor(self):
        row = ValidationRow(0.95, "tcm_1", 0.0, 3e-17, 1e-18, scale=2.0)
        assert not row.flagged
        assert ValidationRow(0.95, "tm_1", 1.0, 1.5, 0.1).flagged

    def test_analytic_side_matches_engine(self, gig_portfolio):
        rows = validation_report(gig_portfolio, [0.95], 3, 5000, 1)
        A = CapitalAllocator(gig_portfolio)
        got = {r.quantity: r.analytic for r in rows}
        assert got["tm_3"] == A.table(0.95, 3).tm(3)
        assert got["tv_alloc_2"] == A.tv(0.95).capitals[1]
        assert got["cross_moment_2_3"] == A.cross_moment(1, 2, 0.95)
