"""Ground truth for the normal linear model ``Y = lam + X gamma + U``.

Three independent routes to the same numbers: closed-form effects, a
brute-force simulation that differentiates the outcome quantile numerically,
and a quadrature check of the Gaussian integration-by-parts identity that
links the two scale-effect expressions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import special

from .effects import PolicySpec
from .errors import ConfigError, PivotMismatch, QuadratureFailure, UnsupportedDistribution
from .numerics import sample_quantile
from .rng import VAR_U, VAR_X, substream

X_DISTRIBUTIONS = ("normal", "shifted_exponential")

#: Draws per brute-force block; blocks are the unit of seeding, not of parallelism.
BLOCK_SIZE = 250_000


@dataclass(frozen=True)
class NormalLinearDgp:
    """``Y = lam + X gamma + U`` with ``U ~ N(0, sigma_u^2)`` independent of X.

    ``x_dist="shifted_exponential"`` keeps mean ``mu_x`` and standard deviation
    ``sigma_x`` but makes X right-skewed; only simulation supports it.
    """

    lam: float = 0.0
    gamma: float = 1.0
    mu_x: float = 0.0
    sigma_x: float = 1.0
    sigma_u: float = 1.0
    x_dist: str = "normal"

    def __post_init__(self):
        for name in ("lam", "gamma", "mu_x", "sigma_x", "sigma_u"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if not (self.sigma_x > 0 and self.sigma_u > 0):
            raise ConfigError("sigma_x and sigma_u must be positive")
        if self.x_dist not in X_DISTRIBUTIONS:
            raise UnsupportedDistribution(f"x_dist {self.x_dist!r} not in {X_DISTRIBUTIONS}")

    @property
    def r_squared(self) -> float:
        signal = (self.gamma * self.sigma_x) ** 2
        return signal / (signal + self.sigma_u**2)

    @property
    def sd_y(self) -> float:
        return math.hypot(self.gamma * self.sigma_x, self.sigma_u)

    def quantile_y(self, tau: float) -> float:
        self._require_normal()
        return self.lam + self.mu_x * self.gamma + self.sd_y * float(special.ndtri(tau))

    def draw_x(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.x_dist == "normal":
            return self.mu_x + self.sigma_x * rng.standard_normal(n)
        return self.mu_x + self.sigma_x * (rng.standard_exponential(n) - 1.0)

    def draw_u(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.sigma_u * rng.standard_normal(n)

    def outcome(self, x, u) -> np.ndarray:
        return self.lam + x * self.gamma + u

    def _require_normal(self):
        if self.x_dist != "normal":
            raise UnsupportedDistribution("closed forms hold only for normal X")


@dataclass(frozen=True)
class ClosedFormEffects:
    pi_L: float
    pi_S: float
    elasticity: float | None


@dataclass(frozen=True)
class BruteForceEffect:
    pi_L: float
    pi_S: float
    se_L: float
    se_S: float


def _check_tau(tau: float):
    if not 0.0 < tau < 1.0:
        raise ConfigError(f"tau must lie in (0, 1), got {tau!r}")


def closed_form_effects(dgp: NormalLinearDgp, policy: PolicySpec, tau: float) -> ClosedFormEffects:
    """Exact location and scale effects with the pivot at the mean of X.

    The scale effect is ``sdot0 * sqrt(R^2) * sigma_x * |gamma| * z_tau`` and
    the elasticity is ``sqrt(R^2) Q_tau[(X - mu_x) gamma] / Q_tau[Y]``, which
    reduces to ``R^2`` when ``lam = mu_x = 0`` (including the limit at the median).
    """
    dgp._require_normal()
    _check_tau(tau)
    if policy.simultaneous:
        raise ConfigError("closed forms cover a single target")
    if not math.isclose(policy.mu, dgp.mu_x, rel_tol=1e-12, abs_tol=1e-12):
        raise PivotMismatch(f"closed form needs mu == mu_x ({policy.mu} != {dgp.mu_x})")
    z = float(special.ndtri(tau))
    root_r2 = math.sqrt(dgp.r_squared)
    q_centered = dgp.sigma_x * abs(dgp.gamma) * z
    pi_L = policy.ldot0 * dgp.gamma
    pi_S = policy.sdot0 * root_r2 * q_centered
    center = dgp.lam + dgp.mu_x * dgp.gamma
    if center == 0.0:
        elasticity = dgp.r_squared
    else:
        q_y = center + dgp.sd_y * z
        elasticity = root_r2 * q_centered / q_y if q_y != 0.0 else None
    return ClosedFormEffects(float(pi_L), float(pi_S), elasticity)


def _block_sizes(n_sim: int) -> list[int]:
    full, rest = divmod(n_sim, BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def brute_force_effect(
    dgp: NormalLinearDgp,
    policy: PolicySpec,
    tau: float,
    delta: float = 0.01,
    n_sim: int = 4_000_000,
    seed: int = 0,
) -> BruteForceEffect:
    """Central finite differences of simulated outcome quantiles.

    The location channel shifts X by ``+-delta * ldot0``; the scale channel
    rescales ``X - mu`` by ``1 +- delta * sdot0``. Both use the same draws
    (common random numbers). The point estimate uses every draw; the standard
    errors come from the spread of per-block estimates. Blocks are keyed by
    index, so the result does not depend on how the work is split.
    """
    _check_tau(tau)
    if policy.simultaneous:
        raise ConfigError("brute-force oracle covers a single target")
    if not 0.0 < delta <= 0.1:
        raise ConfigError(f"delta must lie in (0, 0.1], got {delta!r}")
    if n_sim < 1_000_000:
        raise ConfigError(f"n_sim must be at least 1e6, got {n_sim}")

    xs, us = [], []
    for b, size in enumerate(_block_sizes(n_sim)):
        xs.append(dgp.draw_x(substream(seed, b, VAR_X), size))
        us.append(dgp.draw_u(substream(seed, b, VAR_U), size))

    def channels(x, u):
        loc = scale = 0.0
        if policy.ldot0 != 0.0:
            shift = delta * policy.ldot0
            up = sample_quantile(dgp.outcome(x + shift, u), tau)
            down = sample_quantile(dgp.outcome(x - shift, u), tau)
            loc = (up - down) / (2.0 * delta)
        if policy.sdot0 != 0.0:
            c = x - policy.mu
            up = sample_quantile(dgp.outcome(c * (1.0 + delta * policy.sdot0) + policy.mu, u), tau)
            down = sample_quantile(dgp.outcome(c * (1.0 - delta * policy.sdot0) + policy.mu, u), tau)
            scale = (up - down) / (2.0 * delta)
        return loc, scale

    per_block = np.array([channels(x, u) for x, u in zip(xs, us)])
    pi_L, pi_S = channels(np.concatenate(xs), np.concatenate(us))
    sizes = np.array([x.size for x in xs], dtype=np.float64)
    # size-weighted spread of block estimates, scaled to the full sample
    w = sizes / sizes.sum()
    centered = per_block - per_block.T @ w
    var_block = (w[:, None] * centered**2).sum(axis=0) * len(xs) / max(len(xs) - 1, 1)
    se = np.sqrt(var_block * BLOCK_SIZE / n_sim)
    return BruteForceEffect(float(pi_L), float(pi_S), float(se[0]), float(se[1]))


def stein_check(dgp: NormalLinearDgp, tau: float, n_quad: int = 64) -> float:
    """``|E[m(X)(X - mu_x)] - sigma_x^2 E[m'(X)]|`` by Gauss-Hermite quadrature.

    ``m(x)`` is the derivative in x of the conditional survival function of Y
    at the unconditional quantile ``Q_tau[Y]``.
    """
    dgp._require_normal()
    _check_tau(tau)
    if n_quad < 1:
        raise QuadratureFailure("quadrature needs at least one node")
    nodes, weights = hermegauss(n_quad)
    weights = weights / math.sqrt(2.0 * math.pi)
    x = dgp.mu_x + dgp.sigma_x * nodes
    q = dgp.quantile_y(tau)
    z = (q - dgp.lam - x * dgp.gamma) / dgp.sigma_u
    dens = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    m = dgp.gamma / dgp.sigma_u * dens
    m_prime = (dgp.gamma / dgp.sigma_u) ** 2 * z * dens
    lhs = weights @ (m * (x - dgp.mu_x))
    rhs = dgp.sigma_x**2 * (weights @ m_prime)
    residual = abs(lhs - rhs)
    if not (math.isfinite(lhs) and math.isfinite(rhs)):
        raise QuadratureFailure("quadrature produced a non-finite value")
    return float(residual)
