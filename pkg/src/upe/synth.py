"""Schema-compatible synthetic datasets for exercising the estimate workflow."""
from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .oracle import NormalLinearDgp
from .rng import VAR_U, VAR_W, VAR_X, substream

PROFILES = ("wage1-like", "mc")


def wage_like(n: int, seed: int) -> dict[str, np.ndarray]:
    """Log wages with schooling, experience, tenure and two indicators.

    The noise standard deviation grows with schooling, so schooling has both
    a location and a scale effect on the wage distribution.
    """
    gx, gw, gu = substream(seed, 0, VAR_X), substream(seed, 0, VAR_W), substream(seed, 0, VAR_U)
    educ = np.clip(np.rint(12.5 + 2.8 * gx.standard_normal(n)), 0, 18)
    exper = np.rint(gw.gamma(2.0, 8.5, n))
    tenure = np.minimum(np.rint(gw.exponential(5.0, n)), exper)
    nonwhite = (gw.random(n) < 0.10).astype(float)
    female = (gw.random(n) < 0.48).astype(float)
    sd = 0.38 + 0.025 * (educ - 12.5)
    lwage = (0.28 + 0.092 * educ + 0.0041 * exper + 0.022 * tenure - 0.01 * nonwhite
             - 0.30 * female + np.maximum(sd, 0.1) * gu.standard_normal(n))
    return {"lwage": lwage, "educ": educ, "exper": exper, "tenure": tenure,
            "nonwhite": nonwhite, "female": female}


def linear_normal(n: int, seed: int, dgp: NormalLinearDgp = NormalLinearDgp()) -> dict[str, np.ndarray]:
    x = dgp.draw_x(substream(seed, 0, VAR_X), n)
    u = dgp.draw_u(substream(seed, 0, VAR_U), n)
    return {"y": dgp.outcome(x, u), "x": x}


def generate(profile: str, n: int, seed: int) -> dict[str, np.ndarray]:
    if n < 1:
        raise ConfigError("n must be positive")
    if profile == "wage1-like":
        return wage_like(n, seed)
    if profile == "mc":
        return linear_normal(n, seed)
    raise ConfigError(f"unknown profile {profile!r}; expected one of {PROFILES}")
