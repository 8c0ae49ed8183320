"""Order-statistic quantiles, Gaussian kernel density and link functions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from . import kernels
from .errors import DegenerateSample, EmptySample, NonFiniteInput

#: Rule-of-thumb constant multiplying ``sd(y) * n**(-1/4)``.
SILVERMAN_CONSTANT = 1.06


class LinkKind(str, Enum):
    PROBIT = "probit"
    LOGIT = "logit"

    @property
    def code(self) -> int:
        return kernels.PROBIT if self is LinkKind.PROBIT else kernels.LOGIT

    def inverse_cdf(self, p: float) -> float:
        from scipy import special

        return float(special.ndtri(p) if self is LinkKind.PROBIT else special.logit(p))


@dataclass(frozen=True)
class KernelSpec:
    """Smoothing kernel with a fixed bandwidth.

    Only the Gaussian kernel is provided. The asymptotic theory wants
    ``n h^3 -> inf`` and ``n h^5 = O(1)``; :func:`silverman_bandwidth` meets
    that, but any positive bandwidth is accepted here.
    """

    bandwidth: float
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ValueError(f"unsupported kernel {self.kind!r}")
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth!r}")

    def weights(self, u):
        """Rescaled kernel ``K_h(u)`` evaluated elementwise."""
        h = self.bandwidth
        z = np.asarray(u, dtype=np.float64) / h
        return np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * h)


def _as_sample(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size == 0:
        raise EmptySample("sample is empty")
    if not np.all(np.isfinite(y)):
        raise NonFiniteInput("sample contains NaN or infinite values")
    return y


def quantile_rank(n: int, tau: float) -> int:
    """1-based rank ``ceil(n * tau)`` computed exactly for the float ``tau``."""
    return max(1, math.ceil(Fraction(tau) * n))


def sample_quantile(y, tau: float) -> float:
    """Smallest minimiser of the check-function objective.

    This is the order statistic ``y_(ceil(n tau))``; the rank is computed in
    exact rational arithmetic so ``tau=0.7, n=10`` gives rank 7, not 8.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau!r}")
    y = _as_sample(y)
    k = quantile_rank(y.size, tau) - 1
    return float(np.partition(y, k)[k])


def silverman_bandwidth(y) -> float:
    y = _as_sample(y)
    n = y.size
    if n < 2:
        raise DegenerateSample("need at least two observations for a bandwidth")
    sd = float(np.std(y, ddof=1))
    if not sd > 0.0:
        raise DegenerateSample("sample standard deviation is zero")
    return SILVERMAN_CONSTANT * sd * n ** -0.25


def kde_at(y, point: float, kernel: KernelSpec) -> float:
    """``n^-1 sum_i K_h(y_i - point)``."""
    y = _as_sample(y)
    f, _ = kernels.gaussian_kde(y, float(point), kernel.bandwidth)
    return float(f)


def density_derivative_at(y, point: float, kernel: KernelSpec) -> float:
    """Derivative of :func:`kde_at` with respect to ``point``."""
    y = _as_sample(y)
    _, fdot = kernels.gaussian_kde(y, float(point), kernel.bandwidth)
    return float(fdot)


def link_eval(link: LinkKind, v: float) -> tuple[float, float, float]:
    """CDF ``G``, density ``g`` and density derivative ``gdot`` at ``v``."""
    G, _, g, gdot = link_arrays(link, np.array([v], dtype=np.float64))
    return float(G[0]), float(g[0]), float(gdot[0])


def link_arrays(link: LinkKind, v):
    """Vectorised link evaluation returning ``(G, 1 - G, g, gdot)``.

    The complement is computed directly so it keeps full relative precision
    in the upper tail.
    """
    link = LinkKind(link)
    return kernels.link_arrays(link.code, np.asarray(v, dtype=np.float64))
