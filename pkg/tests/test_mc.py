import math

import numpy as np
import pytest

from upe.effects import PolicySpec
from upe.errors import ConfigError, MinimumReps
from upe.mc import (
    McConfig,
    draw_sample,
    empirical_critical_value,
    run_bias_table,
    run_coverage_table,
    run_normality_diag,
    run_power_curve,
)
from upe.oracle import NormalLinearDgp
from upe.rng import VAR_U, VAR_X, substream

SMALL = dict(n=300, taus=(0.25, 0.5), links=("probit",), seed=7)


def _cfg(**kw):
    return McConfig(**{**SMALL, **kw})


class TestDeterminism:
    def test_worker_count_does_not_change_results(self):
        one = run_coverage_table(_cfg(reps=12, gamma_grid=(0.5, 1.0), workers=1))
        two = run_coverage_table(_cfg(reps=12, gamma_grid=(0.5, 1.0), workers=2))
        assert one.rows == two.rows

    def test_replication_independent_of_batch(self):
        a = draw_sample(NormalLinearDgp(), 50, 9, 3)
        b = draw_sample(NormalLinearDgp(), 50, 9, 3)
        c = draw_sample(NormalLinearDgp(), 50, 9, 4)
        np.testing.assert_array_equal(a.y, b.y)
        assert not np.array_equal(a.y, c.y)

    def test_substreams_are_uncorrelated(self):
        draws = [substream(1, r, v).standard_normal(20_000)
                 for r in range(3) for v in (VAR_X, VAR_U)]
        corr = np.corrcoef(draws)
        off = corr[~np.eye(len(draws), dtype=bool)]
        assert np.max(np.abs(off)) < 0.03


@pytest.fixture(scope="module")
def bias_summary():
    return run_bias_table(_cfg(reps=600))


class TestBiasTable:
    @pytest.fixture
    def summary(self, bias_summary):
        return bias_summary

    def test_mse_identity(self, summary):
        for est in ("pi_L", "pi_S"):
            for tau in SMALL["taus"]:
                b = summary.get(est, "probit", tau, "bias").value
                v = summary.get(est, "probit", tau, "variance").value
                m = summary.get(est, "probit", tau, "mse").value
                assert abs(m - (b * b + v)) <= 1e-12

    def test_rows_and_failures(self, summary):
        assert {r.statistic for r in summary.rows} == {"bias", "variance", "mse", "failed_reps"}
        assert summary.invalid == []

    def test_mc_se_shrinks_with_reps(self, summary):
        bigger = run_bias_table(_cfg(reps=1200))
        for row in summary.rows:
            if row.statistic == "failed_reps":
                continue
            other = bigger.get(row.estimator, row.link, row.tau, row.statistic)
            assert row.mc_se / other.mc_se == pytest.approx(math.sqrt(2), rel=0.2)


@pytest.fixture(scope="module")
def power_summary():
    cfg = McConfig(dgp=NormalLinearDgp(mu_x=1.0), n=300, reps=200, taus=(0.75,),
                   links=("probit",), policy=PolicySpec(sdot0=-1.0, mu=0.0),
                   gamma_grid=(-0.3, 0.3), seed=5)
    return run_power_curve(cfg)


class TestPower:
    @pytest.fixture
    def summary(self, power_summary):
        return power_summary

    def test_adjusted_size_is_nominal(self, summary):
        assert summary.get("t_scale", "probit", 0.75, "size_adjusted_power", 0.0).value == 0.05

    def test_rates_are_proportions(self, summary):
        rates = [r.value for r in summary.rows if "rejection" in r.statistic or "power" in r.statistic]
        assert rates and all(0.0 <= r <= 1.0 for r in rates)

    def test_series_layout(self, summary):
        s = summary.series["power_series_probit"]
        np.testing.assert_array_equal(s["gamma"], [-0.3, 0.0, 0.3])
        assert set(s) == {"gamma", "raw_tau0.75", "adjusted_tau0.75"}

    def test_critical_value_order_statistic(self):
        t = np.arange(1, 101, dtype=float) * np.where(np.arange(100) % 2, 1, -1)
        assert empirical_critical_value(t) == 95.0
        with pytest.raises(MinimumReps):
            empirical_critical_value(np.array([]))


class TestCoverageAndNormality:
    def test_coverage_is_proportion(self):
        s = run_coverage_table(_cfg(reps=40, gamma_grid=(1.0,)))
        cov = [r for r in s.rows if r.statistic == "coverage"]
        assert len(cov) == 4 and all(0.0 <= r.value <= 1.0 for r in cov)

    def test_normality_refuses_tiny_runs(self):
        with pytest.raises(MinimumReps):
            run_normality_diag(_cfg(reps=1))

    def test_normality_outputs(self):
        s = run_normality_diag(_cfg(reps=40, taus=(0.5,), gamma_grid=(0.75,)))
        p = s.get("pi_S", "probit", 0.5, "ks_pvalue").value
        assert 0.0 <= p <= 1.0
        qq = s.series["qq_pi_S_probit_tau0.5_gamma0.75"]
        assert qq["empirical"].size == 40 and np.all(np.diff(qq["empirical"]) >= 0)


class TestConfigValidation:
    @pytest.mark.parametrize("kw", [dict(reps=0), dict(n=10), dict(taus=(1.2,)),
                                    dict(links=()), dict(workers=0), dict(seed=-1),
                                    dict(level=1.0)])
    def test_rejects(self, kw):
        with pytest.raises((ConfigError, ValueError)):
            _cfg(**kw)
