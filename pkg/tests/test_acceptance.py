"""End-to-end acceptance checks, each at its stated tolerance.

Seeds are fixed; run with ``pytest -m acceptance -s`` to see the verdict
lines as they happen (they are also collected in the terminal summary).
"""
import subprocess
import sys

import numpy as np
import pytest

from upe.cdf_model import FittedCdfModel, lambda_weights
from upe.data import Dataset
from upe.effects import PolicySpec, estimate_location_scale, estimate_simultaneous, fit_tau
from upe.mc import McConfig, run_bias_table, run_coverage_table, run_normality_diag, run_power_curve
from upe.numerics import LinkKind
from upe.oracle import NormalLinearDgp, brute_force_effect, closed_form_effects, stein_check

pytestmark = pytest.mark.acceptance

TAUS = (0.1, 0.25, 0.5, 0.75, 0.9)
LS = PolicySpec(ldot0=1.0, sdot0=-1.0, mu=0.0)


@pytest.fixture(scope="module")
def bias_summary():
    return run_bias_table(McConfig(n=1000, reps=2000, links=("probit", "logit"), seed=20240601))


def test_bias_table_reproduction(bias_summary, verdict):
    loc = bias_summary.get("pi_L", "probit", 0.5, "bias")
    var = bias_summary.get("pi_S", "probit", 0.5, "variance")
    loc_ok = abs(loc.value - 0.023) <= max(0.01, 3 * loc.mc_se)
    var_ok = 0.0005 <= var.value <= 0.002
    ok = verdict("C1 bias table", loc_ok and var_ok,
                 f"bias(pi_L, tau=0.5) = {loc.value:.4f} (se {loc.mc_se:.4f}), "
                 f"var(pi_S, tau=0.5) = {var.value:.5f}")
    assert ok


def test_logit_misspecification_signature(bias_summary, verdict):
    logit = bias_summary.get("pi_S", "logit", 0.1, "bias").value
    probit = bias_summary.get("pi_S", "probit", 0.1, "bias").value
    ok = verdict("C2 logit signature", logit > 0 and abs(logit - 0.041) <= 0.015
                 and abs(probit) <= 0.015,
                 f"scale bias at tau=0.1: logit {logit:+.4f}, probit {probit:+.4f}")
    assert ok


def test_coverage(verdict):
    summary = run_coverage_table(McConfig(n=1000, reps=2000, links=("probit",),
                                          gamma_grid=(0.25, 0.5, 1.0), seed=20240602))
    loc = [summary.get("pi_L", "probit", t, "coverage", g).value
           for g in (0.5, 1.0) for t in TAUS]
    scale = summary.get("pi_S", "probit", 0.1, "coverage", 0.25).value
    ok = verdict("C3 coverage", all(0.93 <= c <= 0.97 for c in loc) and scale <= 0.94,
                 f"location cells in [{min(loc):.3f}, {max(loc):.3f}], "
                 f"scale(gamma=0.25, tau=0.1) = {scale:.3f}")
    assert ok


def test_scale_test_size_and_power(verdict):
    cfg = McConfig(dgp=NormalLinearDgp(mu_x=1.0), n=1000, reps=2000, links=("probit",),
                   policy=PolicySpec(sdot0=-1.0, mu=0.0), gamma_grid=(-0.4, 0.4),
                   seed=20240603)
    summary = run_power_curve(cfg)
    size = [summary.get("t_scale", "probit", t, "raw_rejection", 0.0).value for t in TAUS]
    power = [summary.get("t_scale", "probit", t, "size_adjusted_power", g).value
             for g in (-0.4, 0.4) for t in TAUS]
    ok = verdict("C4 t-test", all(0.03 <= s <= 0.07 for s in size) and min(power) >= 0.9,
                 f"raw size in [{min(size):.3f}, {max(size):.3f}], "
                 f"min adjusted power at |gamma|=0.4 = {min(power):.3f}")
    assert ok


def test_oracle_equivalence(verdict):
    dgp = NormalLinearDgp()
    worst, residual, ok = 0.0, 0.0, True
    for tau in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9):
        cf = closed_form_effects(dgp, LS, tau)
        bf = brute_force_effect(dgp, LS, tau, delta=0.01, n_sim=4_000_000, seed=0)
        for exact, num, se in ((cf.pi_L, bf.pi_L, bf.se_L), (cf.pi_S, bf.pi_S, bf.se_S)):
            ratio = abs(num - exact) / max(3 * se, 5e-3)
            worst = max(worst, ratio)
            ok &= ratio <= 1.0
        residual = max(residual, stein_check(dgp, tau, 64))
    ok &= residual <= 1e-8
    ok = verdict("C5 oracle", ok, f"worst |diff|/tolerance = {worst:.2f}, "
                 f"max Stein residual = {residual:.1e}")
    assert ok


def test_exact_identities(verdict):
    rng = np.random.default_rng(20240605)
    n = 3000
    x = rng.standard_normal((n, 2))
    w = rng.standard_normal((n, 1))
    y = x[:, 0] * 0.7 - 0.4 * x[:, 1] + np.exp(0.3 * x[:, 0]) * rng.standard_normal(n) + w[:, 0]
    errors = {}

    one = Dataset(y, x[:, 0], w)
    fit = fit_tau(one, 0.35)
    base = estimate_location_scale(one, PolicySpec(1.3, -0.8, 0.2), 0.35, fit=fit)
    errors["decomposition"] = abs(base.pi_total - (base.pi_L + base.pi_S))
    other = estimate_location_scale(one, PolicySpec(1.3, -0.8, -0.9), 0.35, fit=fit)
    errors["mu-affinity"] = abs((base.pi_S - other.pi_S) - (-(0.2 + 0.9) * -0.8 * base.pi_L / 1.3))

    two = Dataset(y, x, w)
    fit2 = fit_tau(two, 0.6)
    e10, e01 = (estimate_simultaneous(two, PolicySpec(ldot_vec=v), 0.6, fit=fit2).pi_C
                for v in ((1.0, 0.0), (0.0, 1.0)))
    eab = estimate_simultaneous(two, PolicySpec(ldot_vec=(2.5, -1.5)), 0.6, fit=fit2).pi_C
    errors["additivity"] = abs(eab - (2.5 * e10 - 1.5 * e01))

    Z = np.column_stack([rng.standard_normal((50, 3)) * 4, np.ones(50)])
    worst = 0.0
    for _ in range(20):
        theta = rng.standard_normal(4) * 2
        lam = lambda_weights(FittedCdfModel(LinkKind.LOGIT, theta, 0.0, True, 0, 0.0, 3), Z)
        worst = max(worst, float(np.max(np.abs(lam - Z))))
    errors["logit lambda"] = worst

    ok = verdict("C6 identities", max(errors.values()) <= 1e-10,
                 ", ".join(f"{k} {v:.1e}" for k, v in errors.items()))
    assert ok


def test_normality_of_studentized_effects(verdict):
    summary = run_normality_diag(McConfig(n=1000, reps=2000, links=("probit",),
                                          taus=(0.25, 0.5, 0.75), gamma_grid=(0.25, 0.75),
                                          seed=20240607))
    cells = {}
    for est, gamma in (("pi_L", 0.25), ("pi_S", 0.75)):
        for tau in (0.25, 0.5, 0.75):
            cells[f"{est}@{tau:g}"] = summary.get(est, "probit", tau, "ks_pvalue", gamma).value
    ok = verdict("C7 normality", min(cells.values()) > 0.01,
                 ", ".join(f"{k} p={v:.3g}" for k, v in cells.items()))
    assert ok


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "upe.cli", *map(str, args)],
                          capture_output=True, text=True)


def test_determinism_across_workers(tmp_path, verdict):
    cfg = tmp_path / "run.toml"
    cfg.write_text("[mc]\nn = 300\nreps = 40\ntables = [\"bias\", \"coverage\"]\n"
                   "gamma_grid = [0.5, 1.0]\n")
    power = tmp_path / "power.toml"
    power.write_text("[mc]\nn = 300\nreps = 40\ngamma_grid = [-0.2, 0.2]\n")
    mismatched = []
    for command, config in (("simulate", cfg), ("power", power)):
        outs = []
        for workers in (1, 2, 3):
            out = tmp_path / f"{command}_{workers}"
            proc = _cli(command, "--config", config, "--workers", workers, "--seed", 11,
                        "--out", out)
            assert proc.returncode == 0, proc.stderr
            outs.append(out)
        for path in sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file()):
            ref = (outs[0] / path).read_bytes()
            if any((o / path).read_bytes() != ref for o in outs[1:]):
                mismatched.append(f"{command}/{path}")
    ok = verdict("C8 determinism", not mismatched,
                 "simulate and power outputs byte-identical for 1, 2, 3 workers"
                 if not mismatched else f"differing files: {mismatched}")
    assert ok
