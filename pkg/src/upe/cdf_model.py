"""Binary-response model for the conditional CDF at an estimated quantile.

The model is ``P(Y <= q | X, W) = G(Z' theta)`` with
``Z = (phi_x(X)', phi_w(W)')'`` and ``phi_w(W) = (1, W')'``, fitted by
maximum likelihood on the indicator ``1{Y <= q}``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import Dataset
from .errors import (
    AllOneClass,
    DimensionMismatch,
    RankDeficientDesign,
    SeparationDetected,
    SingularHessian,
)
from .numerics import LinkKind, link_arrays

#: Probabilities are clipped to ``[CLIP, 1 - CLIP]`` in logs and denominators.
CLIP = 1e-10
SEPARATION_GAP = 1e-6

_BASES = ("linear", "quadratic")


class NumericalUnderflowWarning(RuntimeWarning):
    """Fitted probabilities hit the clipping floor for some observations."""


@dataclass(frozen=True)
class BasisSpec:
    """Per-target basis for ``phi_x``; a single entry is broadcast to all targets."""

    x_basis: tuple[str, ...] = ("linear",)

    def __post_init__(self):
        basis = (self.x_basis,) if isinstance(self.x_basis, str) else tuple(self.x_basis)
        for b in basis:
            if b not in _BASES:
                raise ValueError(f"unknown basis {b!r}; expected one of {_BASES}")
        object.__setattr__(self, "x_basis", basis)

    def for_targets(self, k: int) -> tuple[str, ...]:
        if len(self.x_basis) == 1:
            return self.x_basis * k
        if len(self.x_basis) != k:
            raise DimensionMismatch(f"basis lists {len(self.x_basis)} entries for {k} targets")
        return self.x_basis


@dataclass(frozen=True)
class Design:
    """Design matrix and basis derivatives.

    ``dphi[i, :, j]`` holds ``d phi_x / d x_j`` at observation ``i``; for two
    targets the (d_phix, 2) slice is the block-diagonal derivative matrix.
    """

    Z: np.ndarray
    dphi: np.ndarray
    d_phix: int
    blocks: tuple[slice, ...]

    @property
    def intercept(self) -> int:
        return self.d_phix

    @property
    def d(self) -> int:
        return self.Z.shape[1]


def build_design(dataset: Dataset, basis: BasisSpec = BasisSpec()) -> Design:
    n, k = dataset.x.shape
    cols, blocks = [], []
    dcols = []
    start = 0
    for j, b in enumerate(basis.for_targets(k)):
        xj = dataset.x[:, j]
        if b == "linear":
            feats, derivs = [xj], [np.ones(n)]
        else:
            feats, derivs = [xj, xj * xj], [np.ones(n), 2.0 * xj]
        cols.extend(feats)
        dcols.append(derivs)
        blocks.append(slice(start, start + len(feats)))
        start += len(feats)
    d_phix = start
    dphi = np.zeros((n, d_phix, k))
    for j, derivs in enumerate(dcols):
        for c, col in zip(range(blocks[j].start, blocks[j].stop), derivs):
            dphi[:, c, j] = col
    Z = np.column_stack(cols + [np.ones(n)] + [dataset.w[:, m] for m in range(dataset.w.shape[1])])
    if n < Z.shape[1] + 1:
        raise DimensionMismatch(f"{n} observations for {Z.shape[1]} coefficients")
    return Design(np.ascontiguousarray(Z), dphi, d_phix, tuple(blocks))


@dataclass(frozen=True)
class FittedCdfModel:
    link: LinkKind
    theta: np.ndarray
    q_hat: float
    converged: bool
    iterations: int
    gradient_norm: float
    d_phix: int

    @property
    def alpha(self) -> np.ndarray:
        return self.theta[: self.d_phix]

    @property
    def beta(self) -> np.ndarray:
        return self.theta[self.d_phix:]

    def index(self, Z) -> np.ndarray:
        return Z @ self.theta

    def probabilities(self, Z) -> np.ndarray:
        return link_arrays(self.link, self.index(Z))[0]


def _intercept_column(Z) -> int | None:
    hits = np.flatnonzero(np.all(Z == 1.0, axis=0))
    return int(hits[0]) if hits.size else None


def fit_binary_link(
    indicator,
    Z,
    link: LinkKind,
    *,
    tol: float = 1e-8,
    max_iter: int = 100,
    q_hat: float = float("nan"),
    d_phix: int = 1,
    check_rank: bool = True,
) -> FittedCdfModel:
    """Maximum likelihood for ``P(indicator = 1 | Z) = G(Z' theta)``.

    Newton-Raphson with step halving, started at zero with the intercept (if
    any column is constant one) at ``G^-1(mean indicator)``. The returned
    model has ``converged=False`` if the mean score is still above ``tol``
    after ``max_iter`` iterations.
    """
    link = LinkKind(link)
    d = np.asarray(indicator, dtype=np.float64).ravel()
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] != d.size:
        raise DimensionMismatch("indicator and design have different row counts")
    if not np.all((d == 0.0) | (d == 1.0)):
        raise ValueError("indicator must be 0/1")
    p = d.mean()
    if p == 0.0 or p == 1.0:
        raise AllOneClass(f"indicator is constant ({int(p)}) for all {d.size} observations")
    if check_rank and np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise RankDeficientDesign(f"design matrix has rank < {Z.shape[1]}")
    theta0 = np.zeros(Z.shape[1])
    ic = _intercept_column(Z)
    if ic is not None:
        theta0[ic] = link.inverse_cdf(p)
    theta, iters, gnorm, status = kernels.fit_binary(
        Z, d, link.code, theta0, tol, max_iter, 30, 1e4, CLIP
    )
    if status == kernels.STATUS_DIVERGED:
        raise SeparationDetected("coefficients diverged (|theta| > 1e4)")
    if status == kernels.STATUS_LINE_SEARCH:
        raise SeparationDetected("step halving failed 30 times")
    if status == kernels.STATUS_SINGULAR:
        raise SingularHessian("Newton system is not positive definite")
    # Under complete separation the logit score can decay below tol before the
    # coefficients blow up, so check the fitted probabilities directly.
    if np.all(np.abs(d - link_arrays(link, Z @ theta)[0]) < SEPARATION_GAP):
        raise SeparationDetected("every observation is fitted to its class")
    return FittedCdfModel(
        link=link,
        theta=np.asarray(theta),
        q_hat=float(q_hat),
        converged=status == kernels.STATUS_CONVERGED,
        iterations=int(iters),
        gradient_norm=float(gnorm),
        d_phix=d_phix,
    )


def _weights(model: FittedCdfModel, Z, link_values=None):
    """``(G, g, g / (G (1 - G)))`` with the denominator clipped.

    Under the logit link the ratio is identically one, so it is returned
    exactly and no clipping is involved.
    """
    if link_values is None:
        link_values = link_arrays(model.link, Z @ model.theta)
    G, Gc, g, _ = link_values
    if model.link is LinkKind.LOGIT:
        return G, g, np.ones_like(g)
    if np.any((G < CLIP) | (Gc < CLIP)):
        warnings.warn(
            "fitted probabilities reached the clipping floor", NumericalUnderflowWarning,
            stacklevel=3,
        )
    GG = np.clip(G, CLIP, 1 - CLIP) * np.clip(Gc, CLIP, 1 - CLIP)
    return G, g, g / GG


def _check_pd(H):
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise SingularHessian("average information matrix is singular") from None


def score_rows(model: FittedCdfModel, indicator, Z) -> np.ndarray:
    """Per-observation score ``g Z (d - G) / (G (1 - G))`` as an (n, d_Z) array."""
    G, _, ratio = _weights(model, Z)
    d = np.asarray(indicator, dtype=np.float64)
    return (ratio * (d - G))[:, None] * Z


def hessian_avg(model: FittedCdfModel, indicator, Z) -> np.ndarray:
    """Information-form average ``n^-1 sum g^2 / (G (1 - G)) Z Z'``.

    Positive semi-definite; it estimates minus the expected Hessian of the
    log-likelihood.
    """
    _, g, ratio = _weights(model, Z)
    H = (Z * (g * ratio)[:, None]).T @ Z / Z.shape[0]
    H = 0.5 * (H + H.T)
    _check_pd(H)
    return H


def lambda_weights(model: FittedCdfModel, Z) -> np.ndarray:
    """Rows ``g Z / (G (1 - G))``; identically ``Z`` under the logit link."""
    _, _, ratio = _weights(model, Z)
    return ratio[:, None] * Z


def likelihood_blocks(model: FittedCdfModel, indicator, Z, link_values=None):
    """``(score_rows, hessian_avg, lambda_weights)`` from a single link evaluation."""
    G, g, ratio = _weights(model, Z, link_values)
    d = np.asarray(indicator, dtype=np.float64)
    lam = ratio[:, None] * Z
    H = (lam * g[:, None]).T @ Z / Z.shape[0]
    H = 0.5 * (H + H.T)
    _check_pd(H)
    return (d - G)[:, None] * lam, H, lam
