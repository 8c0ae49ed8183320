"""Influence-function inference for the effect estimators and the zero-scale t-test.

The influence rows account for every estimated ingredient: the average
derivative, the binary-response coefficients, the sample quantile, and the
kernel density estimate in the denominator.

Sign convention: ``H`` below is the expected Hessian of the log-likelihood
(negative definite). :func:`upe.cdf_model.hessian_avg` returns the
information form, so ``H = -hessian_avg``; the coefficient expansion is then
``theta_hat - theta = -H^-1 (mean score + H_Q * mean psi)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .cdf_model import likelihood_blocks
from .effects import EffectEstimate, PolicySpec, TauFit
from .errors import DensityNearZero, SingularHessian, ZeroVariance
from .numerics import LinkKind, density_derivative_at

__all__ = [
    "InfluenceComponents",
    "ScaleTestResult",
    "ConfidenceInterval",
    "influence_rows",
    "effect_confidence_intervals",
    "density_derivative_at",
    "scale_effect_ttest",
    "normal_multiplier",
]


@dataclass
class InfluenceComponents:
    """Building blocks and per-observation influence rows ``phi_rows`` (n, 2).

    For a location-scale policy the columns of ``phi_rows`` are (location,
    scale); for a simultaneous policy they are the two location components.
    """

    M_hat: np.ndarray
    H_hat: np.ndarray
    HQ_hat: np.ndarray
    D_mu: np.ndarray
    f_hat: float
    fdot_hat: float
    phi_rows: np.ndarray
    psi_rows: np.ndarray
    score: np.ndarray
    avg_rows: np.ndarray
    kernel_rows: np.ndarray
    M_Hinv: np.ndarray
    simultaneous: bool = False

    @property
    def n(self) -> int:
        return self.phi_rows.shape[0]


@dataclass(frozen=True)
class ConfidenceInterval:
    estimate: float
    se: float
    lo: float
    hi: float


@dataclass(frozen=True)
class ScaleTestResult:
    gamma_hat: float
    v_hat: float
    t_stat: float
    p_value: float


def normal_multiplier(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {level!r}")
    return float(special.ndtri(0.5 * (1.0 + level)))


def _score_blocks(fit: TauFit, logit_shortcut: bool):
    """Score rows, information matrix, and ``Lambda`` rows at the fit."""
    model, Z, d = fit.model, fit.design.Z, fit.indicator
    if logit_shortcut and model.link is LinkKind.LOGIT:
        G, _, g, _ = fit.link_values()
        s = (d - G)[:, None] * Z
        H = (Z * g[:, None]).T @ Z / Z.shape[0]
        return s, H, Z
    return likelihood_blocks(model, d, Z, fit.link_values())


def _blocks(fit: TauFit, simultaneous: bool):
    """Average-derivative rows and the Jacobian ``M`` of their mean in theta."""
    n = fit.n
    Z, dphi, d_phix = fit.design.Z, fit.design.dphi, fit.design.d_phix
    _, _, g, gdot = fit.link_values()
    slopes = fit.slopes()
    if simultaneous:
        rows = g[:, None] * slopes
        M = (gdot[:, None] * slopes).T @ Z / n
        M[:, :d_phix] += np.einsum("i,ick->kc", g, dphi) / n
    else:
        xt = np.column_stack([np.ones(n), fit.dataset.x[:, 0]])
        rows = (g * slopes[:, 0])[:, None] * xt
        M = ((gdot * slopes[:, 0])[:, None] * xt).T @ Z / n
        M[:, :d_phix] += (g[:, None] * xt).T @ dphi[:, :, 0] / n
    return rows, M


def influence_rows(
    estimate: EffectEstimate,
    policy: PolicySpec,
    *,
    strict_indicator: bool = False,
    logit_shortcut: bool = False,
) -> InfluenceComponents:
    """Plug-in influence rows ``Phi_i`` for ``(pi_L, pi_S)`` or the two location components.

    ``strict_indicator`` uses ``1{Y < q}`` in the quantile influence function
    instead of ``1{Y <= q}``.
    """
    fit = estimate.fit
    f = fit.f_hat
    if not f > 0:
        raise DensityNearZero("density estimate at the quantile is not positive")
    simultaneous = policy.simultaneous
    if simultaneous:
        D = -np.diag(policy.ldot_vec)
        pi = np.asarray(estimate.pi_L_components)
    else:
        D = policy.d_mu
        pi = np.array([estimate.pi_L, estimate.pi_S])

    rows, M = _blocks(fit, simultaneous)
    s, Hinfo, lam = _score_blocks(fit, logit_shortcut)
    y = fit.y
    kw = fit.kernel.weights(y - fit.q_hat)
    HQ = kw @ lam / fit.n
    below = (y < fit.q_hat) if strict_indicator else (y <= fit.q_hat)
    psi = (fit.tau - below) / f
    fdot = fit.fdot()
    try:
        # H = -Hinfo, so M H^-1 = -M Hinfo^-1
        M_Hinv = -np.linalg.solve(Hinfo, M.T).T
    except np.linalg.LinAlgError:
        raise SingularHessian("information matrix is singular") from None

    centered = rows - rows.mean(axis=0)
    DM_Hinv = D @ M_Hinv
    phi = (
        centered @ D.T / f
        - s @ DM_Hinv.T / f
        - np.outer(psi, pi * fdot / f + DM_Hinv @ HQ / f)
        - np.outer((kw - kw.mean()) / f, pi)
    )
    return InfluenceComponents(
        M_hat=M, H_hat=Hinfo, HQ_hat=HQ, D_mu=D, f_hat=f, fdot_hat=fdot,
        phi_rows=phi, psi_rows=psi, score=s, avg_rows=rows, kernel_rows=kw,
        M_Hinv=M_Hinv, simultaneous=simultaneous,
    )


def effect_confidence_intervals(
    components: InfluenceComponents, estimate: EffectEstimate, level: float = 0.95
) -> dict[str, ConfidenceInterval]:
    """Normal-approximation intervals with ``se = sqrt(n^-2 sum (l' Phi_i)^2)``.

    Keys are ``location``, ``scale`` and ``total`` for a location-scale
    policy, or ``location_1``, ``location_2`` and ``compensated``.
    """
    z = normal_multiplier(level)
    phi = components.phi_rows
    n = phi.shape[0]
    if components.simultaneous:
        c1, c2 = estimate.pi_L_components
        named = {"location_1": (c1, phi[:, 0]), "location_2": (c2, phi[:, 1]),
                 "compensated": (estimate.pi_C, phi[:, 0] + phi[:, 1])}
    else:
        named = {"location": (estimate.pi_L, phi[:, 0]), "scale": (estimate.pi_S, phi[:, 1]),
                 "total": (estimate.pi_total, phi[:, 0] + phi[:, 1])}
    out = {}
    for name, (point, col) in named.items():
        se = float(np.sqrt(col @ col) / n)
        out[name] = ConfidenceInterval(float(point), se, float(point - z * se), float(point + z * se))
    return out


def scale_effect_ttest(
    estimate: EffectEstimate,
    policy: PolicySpec,
    components: InfluenceComponents | None = None,
    *,
    logit_shortcut: bool = False,
) -> ScaleTestResult:
    """t-test of a zero scale effect based on the density-free numerator ``Gamma``.

    The scale derivative is normalised to one, so ``D_S' = (mu, -1)``; the
    sign of ``policy.sdot0`` does not affect the two-sided p-value.
    """
    if components is None:
        ls_policy = policy if not policy.simultaneous else PolicySpec(sdot0=1.0, mu=policy.mu)
        components = influence_rows(estimate, ls_policy, logit_shortcut=logit_shortcut)
    if components.simultaneous:
        raise ValueError("the scale test needs location-scale influence components")
    n = components.n
    d_s = np.array([policy.mu, -1.0])
    rows = components.avg_rows
    gamma_hat = float(d_s @ rows.mean(axis=0))
    M_Hinv = components.M_Hinv
    psi = components.psi_rows
    phi_g = (
        (rows - rows.mean(axis=0))
        - components.score @ M_Hinv.T
        - np.outer(psi, M_Hinv @ components.HQ_hat)
    )
    proj = phi_g @ d_s
    v_hat = float(proj @ proj / n)
    if not v_hat > 0.0:
        raise ZeroVariance("variance estimate of the scale numerator is not positive")
    t = float(np.sqrt(n) * gamma_hat / np.sqrt(v_hat))
    p = float(2.0 * special.ndtr(-abs(t)))
    return ScaleTestResult(gamma_hat, v_hat, t, p)
