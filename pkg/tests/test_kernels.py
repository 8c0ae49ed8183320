import numpy as np
import pytest

from upe import _kernels_py as py
from upe import kernels

compiled = pytest.importorskip("upe._kernels")

LINKS = [py.PROBIT, py.LOGIT]


def _problem(n, seed, separable=False):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    Z = np.column_stack([np.ones(n), x])
    d = (x > 0).astype(float) if separable else (x + rng.standard_normal(n) < 0.3).astype(float)
    return Z, d


@pytest.mark.parametrize("kind", LINKS)
def test_link_arrays_agree(kind):
    v = np.linspace(-40, 40, 2001)
    for a, b in zip(compiled.link_arrays(kind, v), py.link_arrays(kind, v)):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-300)


def test_kde_agrees():
    y = np.random.default_rng(4).standard_normal(1000)
    for point in (-1.0, 0.0, 2.5):
        a = compiled.gaussian_kde(y, point, 0.3)
        b = py.gaussian_kde(y, point, 0.3)
        np.testing.assert_allclose(a, b, rtol=1e-13)


@pytest.mark.parametrize("kind", LINKS)
def test_fit_agrees(kind):
    Z, d = _problem(800, 5)
    args = (Z, d, kind, np.zeros(2), 1e-8, 100, 30, 50.0, 1e-10)
    ta, ia, ga, sa = compiled.fit_binary(*args)
    tb, ib, gb, sb = py.fit_binary(*args)
    assert sa == sb == py.STATUS_CONVERGED
    assert ia == ib
    np.testing.assert_allclose(ta, tb, rtol=1e-10, atol=1e-12)
    assert ga <= 1e-8 and gb <= 1e-8


@pytest.mark.parametrize("backend", [compiled, py])
def test_separation_reports_divergence(backend):
    Z, d = _problem(200, 6, separable=True)
    _, _, _, status = backend.fit_binary(Z, d, py.LOGIT, np.zeros(2), 1e-8, 200, 30, 50.0, 1e-10)
    assert status in (py.STATUS_DIVERGED, py.STATUS_MAX_ITER, py.STATUS_LINE_SEARCH)


@pytest.mark.parametrize("backend", [compiled, py])
def test_iteration_cap(backend):
    Z, d = _problem(500, 7)
    _, it, _, status = backend.fit_binary(Z, d, py.PROBIT, np.zeros(2), 1e-30, 2, 30, 50.0, 1e-10)
    assert (it, status) == (2, py.STATUS_MAX_ITER)


def test_dispatcher_exports_one_backend():
    assert kernels.BACKEND in ("compiled", "python")
    assert kernels.link_arrays is (compiled.link_arrays if kernels.BACKEND == "compiled"
                                   else py.link_arrays)
