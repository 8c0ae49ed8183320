# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: link evaluation, Gaussian KDE, binary-response Newton fit.

Same call signatures and return conventions as ``_kernels_py``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, sqrt, INFINITY
from scipy.special.cython_special cimport ndtr

cnp.import_array()

cdef enum:
    PROBIT = 0
    LOGIT = 1
    MAXD = 64
    _CONVERGED = 0
    _MAX_ITER = 1
    _DIVERGED = 2
    _LINE_SEARCH = 3
    _SINGULAR = 4

cdef double INV_SQRT_2PI = 0.3989422804014327

STATUS_CONVERGED = 0
STATUS_MAX_ITER = 1
STATUS_DIVERGED = 2
STATUS_LINE_SEARCH = 3
STATUS_SINGULAR = 4


cdef inline double _expit(double x) noexcept nogil:
    cdef double z
    if x >= 0.0:
        z = exp(-x)
        return 1.0 / (1.0 + z)
    z = exp(x)
    return z / (1.0 + z)


cdef inline void _link(int kind, double v, double* G, double* Gc,
                       double* g, double* gdot) noexcept nogil:
    if kind == PROBIT:
        G[0] = ndtr(v)
        Gc[0] = ndtr(-v)
        g[0] = INV_SQRT_2PI * exp(-0.5 * v * v)
        gdot[0] = -v * g[0]
    else:
        G[0] = _expit(v)
        Gc[0] = _expit(-v)
        g[0] = G[0] * Gc[0]
        gdot[0] = g[0] * (Gc[0] - G[0])


cdef inline double _clip(double x, double lo, double hi) noexcept nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def link_arrays(int kind, v):
    cdef double[::1] vv = np.ascontiguousarray(v, dtype=np.float64).ravel()
    cdef Py_ssize_t n = vv.shape[0], i
    G = np.empty(n)
    Gc = np.empty(n)
    g = np.empty(n)
    gdot = np.empty(n)
    cdef double[::1] a = G, b = Gc, c = g, e = gdot
    with nogil:
        for i in range(n):
            _link(kind, vv[i], &a[i], &b[i], &c[i], &e[i])
    shape = np.shape(v)
    return G.reshape(shape), Gc.reshape(shape), g.reshape(shape), gdot.reshape(shape)


def gaussian_kde(y, double point, double h):
    cdef double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = yy.shape[0], i
    cdef double u, k, s0 = 0.0, s1 = 0.0
    with nogil:
        for i in range(n):
            u = (yy[i] - point) / h
            k = INV_SQRT_2PI * exp(-0.5 * u * u)
            s0 += k
            s1 += u * k
    return s0 / (n * h), s1 / (n * h * h)


cdef int _cholesky_solve(double* A, double* b, double* x, int p) noexcept nogil:
    """Solve A x = b in place for symmetric positive definite A (row-major)."""
    cdef int i, j, k
    cdef double s
    for j in range(p):
        s = A[j * p + j]
        for k in range(j):
            s -= A[j * p + k] * A[j * p + k]
        if not s > 0.0:
            return -1
        A[j * p + j] = sqrt(s)
        for i in range(j + 1, p):
            s = A[i * p + j]
            for k in range(j):
                s -= A[i * p + k] * A[j * p + k]
            A[i * p + j] = s / A[j * p + j]
    for i in range(p):
        s = b[i]
        for k in range(i):
            s -= A[i * p + k] * x[k]
        x[i] = s / A[i * p + i]
    for i in range(p - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, p):
            s -= A[k * p + i] * x[k]
        x[i] = s / A[i * p + i]
    return 0


cdef double _evaluate(int kind, double[:, ::1] Z, double[::1] d, double* theta,
                     double clip, double* grad, double* A, double* B,
                     double* grad_norm) noexcept nogil:
    """Log-likelihood, score sum, and (lower-triangle filled) Hessian forms in one pass.

    ``A`` is minus the observed Hessian, ``B`` the information form.
    """
    cdef Py_ssize_t n = Z.shape[0], p = Z.shape[1], i, j, k
    cdef double v, G, Gc, g, gdot, GG, r, g2, w, gmax, zj, ll = 0.0
    for j in range(p):
        grad[j] = 0.0
        for k in range(p):
            A[j * p + k] = 0.0
            B[j * p + k] = 0.0
    for i in range(n):
        v = 0.0
        for j in range(p):
            v += Z[i, j] * theta[j]
        _link(kind, v, &G, &Gc, &g, &gdot)
        G = _clip(G, clip, 1.0 - clip)
        Gc = _clip(Gc, clip, 1.0 - clip)
        if d[i] != 0.0:
            ll += log(G)
        else:
            ll += log(Gc)
        GG = G * Gc
        r = (d[i] - G) / GG
        g2 = g * g / GG
        w = g2 + g2 * r * (1.0 - 2.0 * G) - gdot * r
        for j in range(p):
            zj = Z[i, j]
            grad[j] += zj * g * r
            for k in range(j + 1):
                A[j * p + k] += w * zj * Z[i, k]
                B[j * p + k] += g2 * zj * Z[i, k]
    gmax = 0.0
    for j in range(p):
        if fabs(grad[j]) > gmax:
            gmax = fabs(grad[j])
        for k in range(j):
            A[k * p + j] = A[j * p + k]
            B[k * p + j] = B[j * p + k]
    grad_norm[0] = gmax / n
    return ll


cdef int _newton_direction(double* A, double* B, double* grad, double* step, int p) noexcept nogil:
    cdef double Aw[MAXD * MAXD]
    cdef double rhs[MAXD]
    cdef int j
    for j in range(p * p):
        Aw[j] = A[j]
    for j in range(p):
        rhs[j] = grad[j]
    if _cholesky_solve(Aw, rhs, step, p) == 0:
        return 0
    for j in range(p * p):
        Aw[j] = B[j]
    if _cholesky_solve(Aw, rhs, step, p) == 0:
        return 0
    return -1


def fit_binary(Z, d, int kind, theta0, double tol, int max_iter, int max_halvings,
               double max_coef, double clip):
    cdef double[:, ::1] ZZ = np.ascontiguousarray(Z, dtype=np.float64)
    cdef double[::1] dd = np.ascontiguousarray(d, dtype=np.float64)
    cdef int p = <int>ZZ.shape[1], j
    if p > MAXD:
        raise ValueError("design has more than %d columns" % MAXD)
    theta_arr = np.array(theta0, dtype=np.float64, copy=True)
    cdef double[::1] theta = theta_arr
    cdef double grad[MAXD]
    cdef double step[MAXD]
    cdef double cand[MAXD]
    cdef double A[MAXD * MAXD]
    cdef double B[MAXD * MAXD]
    cdef double grad_c[MAXD]
    cdef double A_c[MAXD * MAXD]
    cdef double B_c[MAXD * MAXD]
    cdef double ll, ll_c, t, grad_norm = INFINITY, gn_c, tmax
    cdef int it = 0, h, status = _MAX_ITER, accepted
    with nogil:
        ll = _evaluate(kind, ZZ, dd, &theta[0], clip, grad, A, B, &grad_norm)
        while True:
            if grad_norm <= tol:
                status = _CONVERGED
                break
            if it == max_iter:
                status = _MAX_ITER
                break
            if _newton_direction(A, B, grad, step, p) != 0:
                status = _SINGULAR
                break
            t = 1.0
            accepted = 0
            for h in range(max_halvings):
                for j in range(p):
                    cand[j] = theta[j] + t * step[j]
                ll_c = _evaluate(kind, ZZ, dd, cand, clip, grad_c, A_c, B_c, &gn_c)
                if ll_c >= ll - 1e-12 * (1.0 + fabs(ll)):
                    accepted = 1
                    break
                t *= 0.5
            if not accepted:
                status = _LINE_SEARCH
                break
            tmax = 0.0
            for j in range(p):
                theta[j] = cand[j]
                grad[j] = grad_c[j]
                if fabs(cand[j]) > tmax:
                    tmax = fabs(cand[j])
            for j in range(p * p):
                A[j] = A_c[j]
                B[j] = B_c[j]
            ll = ll_c
            grad_norm = gn_c
            it += 1
            if tmax > max_coef:
                status = _DIVERGED
                break
    return theta_arr, it, grad_norm, status
