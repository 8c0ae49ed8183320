import math

import numpy as np
import pytest

from upe.effects import PolicySpec, estimate_location_scale, estimate_simultaneous, fit_tau
from upe.errors import ZeroVariance
from upe.inference import (
    effect_confidence_intervals,
    influence_rows,
    normal_multiplier,
    scale_effect_ttest,
)
from upe.numerics import LinkKind

from conftest import linear_normal

LS = PolicySpec(ldot0=1.0, sdot0=-1.0, mu=0.0)


@pytest.fixture(scope="module")
def sample():
    return linear_normal(1000, 31)


@pytest.fixture(scope="module")
def estimate(sample):
    return estimate_location_scale(sample, LS, 0.5)


def _rebuild(comp, D, pi):
    """Influence rows from stored blocks with a different D and effect vector."""
    f = comp.f_hat
    DM = D @ comp.M_Hinv
    kw = comp.kernel_rows
    rows = comp.avg_rows
    return (
        (rows - rows.mean(axis=0)) @ D.T / f
        - comp.score @ DM.T / f
        - np.outer(comp.psi_rows, pi * comp.fdot_hat / f + DM @ comp.HQ_hat / f)
        - np.outer((kw - kw.mean()) / f, pi)
    )


class TestInfluenceRows:
    def test_column_means(self, estimate):
        comp = influence_rows(estimate, LS)
        n, f = comp.n, comp.f_hat
        pi = np.array([estimate.pi_L, estimate.pi_S])
        psi_coef = pi * comp.fdot_hat / f + comp.D_mu @ comp.M_Hinv @ comp.HQ_hat / f
        psi_mean = comp.psi_rows.mean()
        assert abs(psi_mean) <= 1 / (n * f) + 1e-15
        np.testing.assert_allclose(comp.phi_rows.mean(axis=0), -psi_mean * psi_coef, atol=1e-7)

    def test_pivot_enters_only_through_d_mu(self, sample):
        fit = fit_tau(sample, 0.3)
        p1, p2 = PolicySpec(1.0, -1.0, 0.0), PolicySpec(1.0, -1.0, 0.8)
        e1 = estimate_location_scale(sample, p1, 0.3, fit=fit)
        e2 = estimate_location_scale(sample, p2, 0.3, fit=fit)
        c1, c2 = influence_rows(e1, p1), influence_rows(e2, p2)
        rebuilt = _rebuild(c1, p2.d_mu, np.array([e2.pi_L, e2.pi_S]))
        np.testing.assert_allclose(rebuilt, c2.phi_rows, rtol=1e-10, atol=1e-12)
        np.testing.assert_array_equal(c1.phi_rows[:, 0], c2.phi_rows[:, 0])

    def test_d_mu_layout(self):
        np.testing.assert_array_equal(PolicySpec(2.0, 3.0, 0.5).d_mu, [[-2.0, 0.0], [1.5, -3.0]])

    def test_scale_variance_magnitude(self):
        # sampling variance of the scale effect at the median with n=1000 is about 0.001
        ses = []
        for seed in range(5):
            est = estimate_location_scale(linear_normal(1000, 300 + seed), LS, 0.5)
            ses.append(effect_confidence_intervals(influence_rows(est, LS), est)["scale"].se)
        var = float(np.mean(np.square(ses)))
        assert 0.001 / 1.5 <= var <= 0.001 * 1.5

    def test_quantile_density_slope_block(self, estimate):
        comp = influence_rows(estimate, LS)
        fit = estimate.fit
        from upe.cdf_model import lambda_weights
        lam = lambda_weights(fit.model, fit.design.Z)
        u = (fit.y - fit.q_hat) / fit.kernel.bandwidth
        kw = np.exp(-0.5 * u * u) / (math.sqrt(2 * math.pi) * fit.kernel.bandwidth)
        np.testing.assert_allclose(comp.HQ_hat, kw @ lam / fit.n, rtol=1e-12)

    def test_logit_shortcut_agrees(self, sample):
        est = estimate_location_scale(sample, LS, 0.6, LinkKind.LOGIT)
        a = influence_rows(est, LS).phi_rows
        b = influence_rows(est, LS, logit_shortcut=True).phi_rows
        np.testing.assert_allclose(a, b, atol=1e-10)

    def test_strict_indicator_changes_only_the_tied_row(self, estimate):
        weak = influence_rows(estimate, LS).phi_rows
        strict = influence_rows(estimate, LS, strict_indicator=True).phi_rows
        differ = np.flatnonzero(np.any(weak != strict, axis=1))
        tied = np.flatnonzero(estimate.fit.y == estimate.q_hat)
        np.testing.assert_array_equal(differ, tied)

    def test_simultaneous_rows(self):
        rng = np.random.default_rng(32)
        from upe.data import Dataset
        x = rng.standard_normal((2000, 2))
        ds = Dataset(x[:, 0] - x[:, 1] + rng.standard_normal(2000), x, np.empty((2000, 0)))
        policy = PolicySpec(ldot_vec=(1.0, -1.0))
        est = estimate_simultaneous(ds, policy, 0.5)
        ci = effect_confidence_intervals(influence_rows(est, policy), est)
        assert set(ci) == {"location_1", "location_2", "compensated"}
        assert ci["compensated"].lo < est.pi_C < ci["compensated"].hi
        assert ci["compensated"].estimate == pytest.approx(2.0, abs=0.3)


class TestIntervals:
    def test_multiplier(self):
        assert normal_multiplier(0.95) == pytest.approx(1.959964, abs=1e-6)
        with pytest.raises(ValueError):
            normal_multiplier(1.0)

    def test_zero_rows_degenerate(self, estimate):
        comp = influence_rows(estimate, LS)
        comp.phi_rows = np.zeros_like(comp.phi_rows)
        ci = effect_confidence_intervals(comp, estimate)
        for c in ci.values():
            assert c.se == 0.0 and c.lo == c.hi == c.estimate

    def test_interval_is_symmetric(self, estimate):
        ci = effect_confidence_intervals(influence_rows(estimate, LS), estimate, level=0.9)
        loc = ci["location"]
        assert loc.hi - loc.estimate == pytest.approx(loc.estimate - loc.lo, rel=1e-12)
        assert (loc.hi - loc.lo) / (2 * loc.se) == pytest.approx(normal_multiplier(0.9))
        assert ci["total"].estimate == estimate.pi_total


class TestScaleTest:
    def test_statistic_definition(self, estimate):
        r = scale_effect_ttest(estimate, LS)
        n = estimate.fit.n
        assert r.t_stat == pytest.approx(math.sqrt(n) * r.gamma_hat / math.sqrt(r.v_hat))
        assert 0.0 <= r.p_value <= 1.0

    def test_gamma_affine_in_pivot(self, sample):
        fit = fit_tau(sample, 0.7)
        est = estimate_location_scale(sample, LS, 0.7, fit=fit)
        g = [scale_effect_ttest(est, PolicySpec(1.0, -1.0, mu)).gamma_hat for mu in (0.0, 1.0, 2.0)]
        comp = influence_rows(est, LS)
        slope = comp.avg_rows[:, 0].mean()
        assert g[1] - g[0] == pytest.approx(slope, abs=1e-14)
        assert g[2] - g[0] == pytest.approx(2 * slope, abs=1e-14)

    def test_detects_heteroskedasticity(self):
        rng = np.random.default_rng(33)
        from upe.data import Dataset
        x = rng.standard_normal(3000)
        ds = Dataset(x + np.exp(0.5 * x) * rng.standard_normal(3000), x, np.empty((3000, 0)))
        est = estimate_location_scale(ds, LS, 0.9)
        assert scale_effect_ttest(est, LS).p_value < 0.01

    def test_zero_variance(self, estimate):
        comp = influence_rows(estimate, LS)
        comp.score = np.zeros_like(comp.score)
        comp.psi_rows = np.zeros_like(comp.psi_rows)
        comp.avg_rows = np.zeros_like(comp.avg_rows)
        with pytest.raises(ZeroVariance):
            scale_effect_ttest(estimate, LS, comp)
