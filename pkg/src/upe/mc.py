"""Replicated experiments on the normal linear model.

Each replication draws ``(X, U)`` from substreams keyed by ``(seed, rep)``,
so the same replication index sees the same draws for every gamma in a grid
and on any worker. Workers return per-replication records; all reductions
happen afterwards in the parent over the full, replication-ordered array,
which makes summaries bitwise independent of the worker count.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special, stats

from .cdf_model import NumericalUnderflowWarning
from .data import Dataset
from .effects import PolicySpec, estimate_location_scale, fit_tau
from .errors import ConfigError, MinimumReps, UpeError
from .inference import effect_confidence_intervals, influence_rows, scale_effect_ttest
from .numerics import LinkKind
from .oracle import NormalLinearDgp, closed_form_effects
from .rng import VAR_U, VAR_X, substream

DEFAULT_TAUS = (0.1, 0.25, 0.5, 0.75, 0.9)
DESK_REPS = 2000
FULL_REPS = 10000
#: A cell with more failed replications than this share is flagged invalid.
MAX_FAILURE_SHARE = 0.01
MIN_NORMALITY_REPS = 30

# record layout per (link, tau)
_PI_L, _PI_S, _SE_L, _SE_S, _T = range(5)
_FIELDS = 5


@dataclass(frozen=True)
class McConfig:
    """One experiment.

    Bias, coverage and normality runs compare against the closed form, which
    needs ``policy.mu == dgp.mu_x``; power runs have no such restriction.
    """

    dgp: NormalLinearDgp = NormalLinearDgp()
    n: int = 1000
    reps: int = DESK_REPS
    taus: tuple[float, ...] = DEFAULT_TAUS
    links: tuple[str, ...] = ("probit", "logit")
    policy: PolicySpec = PolicySpec(ldot0=1.0, sdot0=-1.0, mu=0.0)
    seed: int = 0
    gamma_grid: tuple[float, ...] = ()
    workers: int = 1
    level: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        object.__setattr__(self, "links", tuple(LinkKind(k).value for k in self.links))
        object.__setattr__(self, "gamma_grid", tuple(float(g) for g in self.gamma_grid))
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if self.n < 30:
            raise ConfigError("n must be at least 30")
        if not self.taus or not all(0.0 < t < 1.0 for t in self.taus):
            raise ConfigError("taus must be a non-empty list inside (0, 1)")
        if not self.links:
            raise ConfigError("at least one link is required")
        if self.policy.simultaneous:
            raise ConfigError("the harness simulates a single target")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie in (0, 1)")

    def grid(self) -> tuple[float, ...]:
        return self.gamma_grid or (self.dgp.gamma,)

    def with_gamma(self, gamma: float) -> "McConfig":
        return replace(self, dgp=replace(self.dgp, gamma=gamma))


@dataclass(frozen=True)
class McRow:
    estimator: str
    link: str
    tau: float
    n: int
    gamma: float
    statistic: str
    value: float
    mc_se: float


@dataclass
class McSummary:
    rows: list[McRow] = field(default_factory=list)
    failures: dict[tuple[str, float, float], int] = field(default_factory=dict)
    invalid: list[tuple[str, float, float]] = field(default_factory=list)
    series: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)

    def add(self, estimator, link, tau, n, gamma, statistic, value, mc_se=0.0):
        self.rows.append(McRow(estimator, link, float(tau), int(n), float(gamma), statistic,
                               float(value), float(mc_se)))

    def get(self, estimator, link, tau, statistic, gamma=None) -> McRow:
        for row in self.rows:
            if (row.estimator == estimator and row.link == link and row.tau == tau
                    and row.statistic == statistic and (gamma is None or row.gamma == gamma)):
                return row
        raise KeyError((estimator, link, tau, statistic, gamma))


def draw_sample(dgp: NormalLinearDgp, n: int, seed: int, rep: int) -> Dataset:
    x = dgp.draw_x(substream(seed, rep, VAR_X), n)
    u = dgp.draw_u(substream(seed, rep, VAR_U), n)
    return Dataset(y=dgp.outcome(x, u), x=x, w=np.empty((n, 0)))


def replicate(config: McConfig, gamma: float, rep: int, inference: bool):
    """Records ``(n_links, n_taus, 5)`` and a failure mask for one replication."""
    data = draw_sample(config.with_gamma(gamma).dgp, config.n, config.seed, rep)
    out = np.full((len(config.links), len(config.taus), _FIELDS), np.nan)
    failed = np.zeros((len(config.links), len(config.taus)), dtype=bool)
    policy = config.policy
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NumericalUnderflowWarning)
        for i, link in enumerate(config.links):
            for j, tau in enumerate(config.taus):
                try:
                    fit = fit_tau(data, tau, LinkKind(link))
                    est = estimate_location_scale(data, policy, tau, fit=fit)
                    out[i, j, _PI_L] = est.pi_L
                    out[i, j, _PI_S] = est.pi_S
                    if inference:
                        comp = influence_rows(est, policy)
                        ci = effect_confidence_intervals(comp, est, config.level)
                        out[i, j, _SE_L] = ci["location"].se
                        out[i, j, _SE_S] = ci["scale"].se
                        out[i, j, _T] = scale_effect_ttest(est, policy, comp).t_stat
                except (UpeError, np.linalg.LinAlgError):
                    failed[i, j] = True
                    out[i, j] = np.nan
    return out, failed


def _task(args):
    return replicate(*args)


def run_replications(config: McConfig, gammas, inference: bool):
    """``{gamma: (records (reps, links, taus, 5), failed (reps, links, taus))}``."""
    tasks = [(config, g, r, inference) for g in gammas for r in range(config.reps)]
    if config.workers == 1 or len(tasks) == 1:
        results = list(map(_task, tasks))
    else:
        chunk = max(1, len(tasks) // (config.workers * 8))
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_task, tasks, chunksize=chunk))
    out = {}
    for k, g in enumerate(gammas):
        block = results[k * config.reps:(k + 1) * config.reps]
        out[g] = (np.stack([b[0] for b in block]), np.stack([b[1] for b in block]))
    return out


def _note_failures(summary: McSummary, config: McConfig, gamma, failed):
    for i, link in enumerate(config.links):
        for j, tau in enumerate(config.taus):
            count = int(failed[:, i, j].sum())
            key = (link, float(tau), float(gamma))
            summary.failures[key] = count
            if count:
                warnings.warn(f"{count} of {config.reps} replications failed "
                              f"(link={link}, tau={tau}, gamma={gamma})", RuntimeWarning,
                              stacklevel=3)
            if count > MAX_FAILURE_SHARE * config.reps:
                summary.invalid.append(key)
            summary.add("all", link, tau, config.n, gamma, "failed_reps", count)


def _truth(config: McConfig, gamma: float, tau: float):
    cf = closed_form_effects(config.with_gamma(gamma).dgp, config.policy, tau)
    return cf.pi_L, cf.pi_S


def _moments(e: np.ndarray):
    """Bias, variance (ddof=0), mse and their MC standard errors."""
    r = e.size
    if r == 0:
        return (math.nan,) * 6
    bias = e.mean()
    dev2 = (e - bias) ** 2
    var = dev2.mean()
    sq = e * e
    mse = sq.mean()
    se = lambda a: float(a.std() / math.sqrt(r)) if r > 1 else math.nan  # noqa: E731
    return bias, var, mse, se(e), se(dev2), se(sq)


def run_bias_table(config: McConfig) -> McSummary:
    """Bias, variance and MSE of both effect estimators per link and quantile."""
    summary = McSummary()
    gamma = config.dgp.gamma
    records, failed = run_replications(config, (gamma,), inference=False)[gamma]
    _note_failures(summary, config, gamma, failed)
    for i, link in enumerate(config.links):
        for j, tau in enumerate(config.taus):
            truth = _truth(config, gamma, tau)
            ok = ~failed[:, i, j]
            for name, col, target in (("pi_L", _PI_L, truth[0]), ("pi_S", _PI_S, truth[1])):
                e = records[ok, i, j, col] - target
                bias, var, mse, se_b, se_v, se_m = _moments(e)
                summary.add(name, link, tau, config.n, gamma, "bias", bias, se_b)
                summary.add(name, link, tau, config.n, gamma, "variance", var, se_v)
                summary.add(name, link, tau, config.n, gamma, "mse", mse, se_m)
    return summary


def _proportion(hits: np.ndarray):
    r = hits.size
    if r == 0:
        return math.nan, math.nan
    p = float(hits.mean())
    return p, math.sqrt(p * (1.0 - p) / r)


def run_coverage_table(config: McConfig) -> McSummary:
    """Share of replications whose normal-approximation interval covers the truth."""
    summary = McSummary()
    z = float(special.ndtri(0.5 * (1.0 + config.level)))
    for gamma, (records, failed) in run_replications(config, config.grid(), True).items():
        _note_failures(summary, config, gamma, failed)
        for i, link in enumerate(config.links):
            for j, tau in enumerate(config.taus):
                truth = _truth(config, gamma, tau)
                ok = ~failed[:, i, j]
                for name, col, se_col, target in (("pi_L", _PI_L, _SE_L, truth[0]),
                                                  ("pi_S", _PI_S, _SE_S, truth[1])):
                    dev = np.abs(records[ok, i, j, col] - target)
                    p, se = _proportion(dev <= z * records[ok, i, j, se_col])
                    summary.add(name, link, tau, config.n, gamma, "coverage", p, se)
    return summary


def empirical_critical_value(t_null: np.ndarray, level: float = 0.95) -> float:
    """The ``ceil(level * R)``-th order statistic of ``|t|`` under the null."""
    a = np.sort(np.abs(t_null))
    if a.size == 0:
        raise MinimumReps("no valid null replications")
    k = max(1, math.ceil(level * a.size - 1e-9))
    return float(a[k - 1])


def run_power_curve(config: McConfig) -> McSummary:
    """Raw and size-adjusted rejection rates of the zero-scale t-test over a gamma grid.

    Null replications (gamma = 0) are always run first; their ``|t|``
    distribution fixes the critical value used for the size-adjusted rates.
    """
    summary = McSummary()
    grid = tuple(sorted(set(config.grid()) | {0.0}, key=lambda g: (g != 0.0, g)))
    results = run_replications(config, grid, inference=True)
    z = float(special.ndtri(0.5 * (1.0 + config.level)))
    crit = {}
    records0, failed0 = results[0.0]
    for i, link in enumerate(config.links):
        for j, tau in enumerate(config.taus):
            crit[i, j] = empirical_critical_value(records0[~failed0[:, i, j], i, j, _T], config.level)
            summary.add("t_scale", link, tau, config.n, 0.0, "critical_value", crit[i, j])
    for gamma in sorted(grid):
        records, failed = results[gamma]
        _note_failures(summary, config, gamma, failed)
        for i, link in enumerate(config.links):
            series = summary.series.setdefault(f"power_series_{link}", {"gamma": np.array(sorted(grid))})
            for j, tau in enumerate(config.taus):
                t = np.abs(records[~failed[:, i, j], i, j, _T])
                raw, raw_se = _proportion(t > z)
                adj, adj_se = _proportion(t > crit[i, j])
                summary.add("t_scale", link, tau, config.n, gamma, "raw_rejection", raw, raw_se)
                summary.add("t_scale", link, tau, config.n, gamma, "size_adjusted_power", adj, adj_se)
                for key, val in ((f"raw_tau{tau:g}", raw), (f"adjusted_tau{tau:g}", adj)):
                    series.setdefault(key, np.full(len(grid), np.nan))[sorted(grid).index(gamma)] = val
    return summary


def run_normality_diag(config: McConfig, bins: int = 40) -> McSummary:
    """KS distance of studentized effects from N(0, 1), plus QQ and histogram series."""
    if config.reps < MIN_NORMALITY_REPS:
        raise MinimumReps(f"normality diagnostics need at least {MIN_NORMALITY_REPS} reps")
    summary = McSummary()
    edges = np.linspace(-4.0, 4.0, bins + 1)
    for gamma, (records, failed) in run_replications(config, config.grid(), True).items():
        _note_failures(summary, config, gamma, failed)
        for i, link in enumerate(config.links):
            for j, tau in enumerate(config.taus):
                truth = _truth(config, gamma, tau)
                ok = ~failed[:, i, j]
                for name, col, se_col, target in (("pi_L", _PI_L, _SE_L, truth[0]),
                                                  ("pi_S", _PI_S, _SE_S, truth[1])):
                    zs = (records[ok, i, j, col] - target) / records[ok, i, j, se_col]
                    zs = zs[np.isfinite(zs)]
                    if zs.size < MIN_NORMALITY_REPS:
                        raise MinimumReps(f"only {zs.size} valid studentized draws")
                    ks = stats.kstest(zs, "norm")
                    summary.add(name, link, tau, config.n, gamma, "ks_stat", ks.statistic)
                    summary.add(name, link, tau, config.n, gamma, "ks_pvalue", ks.pvalue)
                    key = f"{name}_{link}_tau{tau:g}_gamma{gamma:g}"
                    emp = np.sort(zs)
                    probs = (np.arange(1, emp.size + 1) - 0.5) / emp.size
                    summary.series[f"qq_{key}"] = {"theoretical": special.ndtri(probs),
                                                   "empirical": emp}
                    counts, _ = np.histogram(zs, bins=edges)
                    summary.series[f"hist_{key}"] = {
                        "left": edges[:-1], "right": edges[1:],
                        "density": counts / (zs.size * np.diff(edges)),
                    }
    return summary


def default_workers() -> int:
    return os.cpu_count() or 1
