"""Point estimates of location, scale and simultaneous-shift quantile effects.

All estimators share one fitted model per quantile level (:class:`TauFit`),
so in-sample identities such as ``pi_total == pi_L + pi_S`` hold exactly.

The conditional CDF is modelled as ``F = G(Z' theta)``. The survival function
``S = 1 - F`` enters the population effect, and ``dS/dx = -g phi_x'(x) alpha``
is the source of the leading minus sign in every estimator below.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cdf_model import BasisSpec, Design, FittedCdfModel, build_design, fit_binary_link
from .data import Dataset
from .errors import (
    DensityNearZero,
    FitNotConverged,
    WrongTargetCount,
    ZeroDenominator,
)
from .numerics import (
    KernelSpec,
    LinkKind,
    density_derivative_at,
    kde_at,
    link_arrays,
    sample_quantile,
    silverman_bandwidth,
)

#: Effects are undefined when the estimated density at the quantile is below this.
DENSITY_FLOOR = 1e-12


@dataclass(frozen=True)
class PolicySpec:
    """Derivatives at zero of the location shift ``l`` and scale shift ``s``.

    ``mu`` is the pivot of the scale shift. ``ldot_vec`` selects the
    simultaneous location shift of two targets instead.
    """

    ldot0: float = 0.0
    sdot0: float = 0.0
    mu: float = 0.0
    ldot_vec: tuple[float, float] | None = None

    def __post_init__(self):
        if self.ldot_vec is not None:
            vec = tuple(float(v) for v in self.ldot_vec)
            if len(vec) != 2:
                raise WrongTargetCount("ldot_vec needs one entry per target (two)")
            object.__setattr__(self, "ldot_vec", vec)
            if not any(vec):
                raise ValueError("simultaneous policy has all-zero derivatives")
        elif self.ldot0 == 0.0 and self.sdot0 == 0.0:
            raise ValueError("policy has ldot0 == sdot0 == 0")

    @property
    def simultaneous(self) -> bool:
        return self.ldot_vec is not None

    @property
    def d_mu(self) -> np.ndarray:
        """Matrix mapping ``E[g phi_x' alpha (1, X)']`` to ``f_Y * (pi_L, pi_S)``."""
        return np.array([[-self.ldot0, 0.0], [self.mu * self.sdot0, -self.sdot0]])


@dataclass
class TauFit:
    """Everything estimated at one quantile level, shared by all effects."""

    dataset: Dataset
    tau: float
    q_hat: float
    kernel: KernelSpec
    f_hat: float
    design: Design
    indicator: np.ndarray
    model: FittedCdfModel
    basis: BasisSpec
    log_outcome: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def y(self) -> np.ndarray:
        return self.dataset.y

    @property
    def n(self) -> int:
        return self.dataset.n

    def link_values(self):
        """``(G, 1 - G, g, gdot)`` at the fitted index."""
        if "link" not in self._cache:
            self._cache["link"] = link_arrays(self.model.link, self.design.Z @ self.model.theta)
        return self._cache["link"]

    def slopes(self) -> np.ndarray:
        """``phi_x'(X_i)' alpha`` per observation and target, shape (n, k)."""
        if "slopes" not in self._cache:
            self._cache["slopes"] = np.einsum("ick,c->ik", self.design.dphi, self.model.alpha)
        return self._cache["slopes"]

    def marginal_rows(self) -> np.ndarray:
        """``dF/dx_j = g(Z' theta) phi_x'(X_i)' alpha`` per observation and target."""
        return self.link_values()[2][:, None] * self.slopes()

    def fdot(self) -> float:
        if "fdot" not in self._cache:
            self._cache["fdot"] = density_derivative_at(self.y, self.q_hat, self.kernel)
        return self._cache["fdot"]


def fit_tau(
    dataset: Dataset,
    tau: float,
    link: LinkKind = LinkKind.PROBIT,
    basis: BasisSpec = BasisSpec(),
    kernel: KernelSpec | None = None,
    *,
    log_outcome: bool = False,
    design: Design | None = None,
) -> TauFit:
    """Quantile, density at the quantile, and the binary-response fit.

    ``kernel=None`` picks the Gaussian kernel with :func:`silverman_bandwidth`.
    With ``log_outcome`` the whole pipeline runs on ``log Y``.
    """
    if log_outcome:
        dataset = dataset.with_log_outcome()
    y = dataset.y
    q_hat = sample_quantile(y, tau)
    if kernel is None:
        kernel = KernelSpec(silverman_bandwidth(y))
    f_hat = kde_at(y, q_hat, kernel)
    if not f_hat >= DENSITY_FLOOR:
        raise DensityNearZero(f"density estimate {f_hat:.3g} at q={q_hat:.6g} (tau={tau})")
    if design is None:
        design = build_design(dataset, basis)
    indicator = (y <= q_hat).astype(np.float64)
    model = fit_binary_link(
        indicator, design.Z, LinkKind(link), q_hat=q_hat, d_phix=design.d_phix
    )
    if not model.converged:
        raise FitNotConverged(
            f"binary fit at tau={tau} stopped with mean score {model.gradient_norm:.3g}"
        )
    return TauFit(dataset, tau, q_hat, kernel, f_hat, design, indicator, model, basis,
                  log_outcome)


@dataclass
class EffectEstimate:
    tau: float
    q_hat: float
    f_hat: float
    pi_L: float = 0.0
    pi_S: float = 0.0
    pi_total: float = 0.0
    mu: float = 0.0
    elasticity: float | None = None
    pi_C: float | None = None
    pi_L_components: tuple[float, float] | None = None
    fit: TauFit | None = field(default=None, repr=False)

    @property
    def model(self) -> FittedCdfModel:
        return self.fit.model


def estimate_location_scale(
    dataset: Dataset,
    policy: PolicySpec,
    tau: float,
    link: LinkKind = LinkKind.PROBIT,
    basis: BasisSpec = BasisSpec(),
    kernel: KernelSpec | None = None,
    *,
    log_outcome: bool = False,
    fit: TauFit | None = None,
) -> EffectEstimate:
    """Location effect ``pi_L``, scale effect ``pi_S`` about ``policy.mu``, and their sum."""
    if policy.simultaneous:
        raise WrongTargetCount("use estimate_simultaneous for a two-target policy")
    if fit is None:
        if dataset.x.shape[1] != 1:
            raise WrongTargetCount("location-scale effects need exactly one target column")
        fit = fit_tau(dataset, tau, link, basis, kernel, log_outcome=log_outcome)
    a = fit.marginal_rows()[:, 0]
    x = fit.dataset.x[:, 0]
    pi_L = -policy.ldot0 / fit.f_hat * a.mean()
    pi_S = -policy.sdot0 / fit.f_hat * np.mean(a * (x - policy.mu))
    est = EffectEstimate(
        tau=tau, q_hat=fit.q_hat, f_hat=fit.f_hat,
        pi_L=float(pi_L), pi_S=float(pi_S), pi_total=float(pi_L + pi_S),
        mu=policy.mu, fit=fit,
    )
    if policy.sdot0 != 0.0:
        if fit.log_outcome:
            est.elasticity = float(pi_S / policy.sdot0)
        elif fit.q_hat != 0.0:
            est.elasticity = elasticity(pi_S, policy.sdot0, fit.q_hat)
    return est


def estimate_simultaneous(
    dataset: Dataset,
    policy: PolicySpec,
    tau: float,
    link: LinkKind = LinkKind.PROBIT,
    basis: BasisSpec = BasisSpec(),
    kernel: KernelSpec | None = None,
    *,
    log_outcome: bool = False,
    fit: TauFit | None = None,
) -> EffectEstimate:
    """Compensated effect ``pi_C = pi_L1 + pi_L2`` of joint location shifts of two targets."""
    if not policy.simultaneous:
        raise WrongTargetCount("simultaneous estimation needs policy.ldot_vec")
    if fit is None:
        if dataset.x.shape[1] != 2:
            raise WrongTargetCount("simultaneous effects need exactly two target columns")
        fit = fit_tau(dataset, tau, link, basis, kernel, log_outcome=log_outcome)
    a = fit.marginal_rows().mean(axis=0)
    comps = tuple(float(-lj / fit.f_hat * aj) for lj, aj in zip(policy.ldot_vec, a))
    pi_C = comps[0] + comps[1]
    return EffectEstimate(
        tau=tau, q_hat=fit.q_hat, f_hat=fit.f_hat, pi_L=pi_C, pi_total=pi_C,
        pi_C=pi_C, pi_L_components=comps, fit=fit,
    )


def elasticity(pi_S: float, sdot0: float, q_tau_y: float) -> float:
    """Quantile-standard-deviation elasticity ``pi_S / (sdot0 * Q_tau[Y])``."""
    if sdot0 == 0.0 or q_tau_y == 0.0:
        raise ZeroDenominator("elasticity needs sdot0 != 0 and Q_tau[Y] != 0")
    return float(pi_S / (sdot0 * q_tau_y))
