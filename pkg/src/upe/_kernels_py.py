"""Pure-numpy implementations of the hot kernels.

Mirrors ``_kernels.pyx`` function for function; selected by :mod:`upe.kernels`
when the compiled module is unavailable or ``UPE_PURE_PYTHON=1`` is set.
"""
import numpy as np
from scipy import special

PROBIT = 0
LOGIT = 1

STATUS_CONVERGED = 0
STATUS_MAX_ITER = 1
STATUS_DIVERGED = 2
STATUS_LINE_SEARCH = 3
STATUS_SINGULAR = 4

_INV_SQRT_2PI = 0.3989422804014327


def link_arrays(kind, v):
    """Return ``(G, 1 - G, g, gdot)`` evaluated elementwise at ``v``."""
    v = np.asarray(v, dtype=np.float64)
    if kind == PROBIT:
        G = special.ndtr(v)
        Gc = special.ndtr(-v)
        g = _INV_SQRT_2PI * np.exp(-0.5 * v * v)
        gdot = -v * g
    else:
        G = special.expit(v)
        Gc = special.expit(-v)
        g = G * Gc
        gdot = g * (Gc - G)
    return G, Gc, g, gdot


def gaussian_kde(y, point, h):
    """Gaussian kernel density and its derivative at ``point``."""
    u = (np.asarray(y, dtype=np.float64) - point) / h
    k = _INV_SQRT_2PI * np.exp(-0.5 * u * u)
    n = u.shape[0]
    f = k.sum() / (n * h)
    # d/dp K((p - y)/h) / h = -K'(u) / h^2 with K'(u) = -u K(u)
    fdot = (u * k).sum() / (n * h * h)
    return f, fdot


def _evaluate(kind, Z, d, theta, clip):
    """Log-likelihood, score sum, minus observed Hessian and information form."""
    G, Gc, g, gdot = link_arrays(kind, Z @ theta)
    G = np.clip(G, clip, 1.0 - clip)
    Gc = np.clip(Gc, clip, 1.0 - clip)
    ll = float(np.sum(np.where(d != 0.0, np.log(G), np.log(Gc))))
    GG = G * Gc
    r = (d - G) / GG
    g2 = g * g / GG
    w = g2 + g2 * r * (1.0 - 2.0 * G) - gdot * r
    grad = Z.T @ (g * r)
    A = (Z * w[:, None]).T @ Z
    B = (Z * g2[:, None]).T @ Z
    return ll, grad, A, B


def fit_binary(Z, d, kind, theta0, tol, max_iter, max_halvings, max_coef, clip):
    """Newton-Raphson with step halving for the Bernoulli log-likelihood.

    Returns ``(theta, iterations, grad_norm, status)`` where ``grad_norm`` is
    the max-abs entry of the *average* score.
    """
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    d = np.ascontiguousarray(d, dtype=np.float64)
    theta = np.array(theta0, dtype=np.float64, copy=True)
    n = Z.shape[0]

    ll, grad, A, B = _evaluate(kind, Z, d, theta, clip)
    grad_norm = float(np.max(np.abs(grad)) / n)
    it = 0
    while True:
        if grad_norm <= tol:
            return theta, it, grad_norm, STATUS_CONVERGED
        if it == max_iter:
            return theta, it, grad_norm, STATUS_MAX_ITER
        step = _solve_pd(A, grad)
        if step is None:
            step = _solve_pd(B, grad)
            if step is None:
                return theta, it, grad_norm, STATUS_SINGULAR
        t = 1.0
        for _ in range(max_halvings):
            cand = theta + t * step
            ll_c, grad_c, A_c, B_c = _evaluate(kind, Z, d, cand, clip)
            if ll_c >= ll - 1e-12 * (1.0 + abs(ll)):
                break
            t *= 0.5
        else:
            return theta, it, grad_norm, STATUS_LINE_SEARCH
        theta, ll, grad, A, B = cand, ll_c, grad_c, A_c, B_c
        grad_norm = float(np.max(np.abs(grad)) / n)
        it += 1
        if np.max(np.abs(theta)) > max_coef:
            return theta, it, grad_norm, STATUS_DIVERGED


def _solve_pd(A, rhs):
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(L)):
        return None
    return np.linalg.solve(L.T, np.linalg.solve(L, rhs))
