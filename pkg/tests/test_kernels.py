import numpy as np
import pytest

from obversim import _pykernels, density as D, kernels
from obversim.geometry import random_points, rotation_from_axis_angle

compiled = kernels.backends().get("cython")
needs_ext = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")
BUILTINS = ("uniform",) + D.BUILTIN_CASES


def test_selected_backend_is_reported():
    assert kernels.BACKEND in kernels.backends()


@needs_ext
@pytest.mark.parametrize("name", BUILTINS)
def test_density_agrees(name, rng):
    d = D.builtin(name)
    pts = np.ascontiguousarray(random_points(rng, 20_000))
    a, b = np.empty(len(pts)), np.empty(len(pts))
    compiled.density_values(d.frame, d.coef, d.power, d.a, d.b, pts, a)
    _pykernels.density_values(d.frame, d.coef, d.power, d.a, d.b, pts, b)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-16)


@needs_ext
@pytest.mark.parametrize("name", BUILTINS)
def test_omega_agrees(name, rng):
    d = D.builtin(name)
    r = rotation_from_axis_angle(random_points(rng, 1)[0], 2.2).matrix
    pts = np.ascontiguousarray(random_points(rng, 20_000))
    a, b = np.empty(len(pts)), np.empty(len(pts))
    bad_a = compiled.omega_values(d.frame, d.coef, d.power, d.a, d.b, r, pts, D.DENSITY_FLOOR, a)
    bad_b = _pykernels.omega_values(d.frame, d.coef, d.power, d.a, d.b, r, pts, D.DENSITY_FLOOR, b)
    assert bad_a == bad_b
    fin = np.isfinite(a)
    assert np.array_equal(fin, np.isfinite(b))
    # ln f loses relative accuracy ~ eps / f next to the zero lines of f
    f = np.minimum(D.values(d, pts), D.values(d, pts @ r.T))[fin]
    assert np.all(np.abs(a[fin] - b[fin]) <= 1e-15 / f + 1e-13)


@needs_ext
def test_rejection_agrees():
    d = D.case3()
    rng = np.random.default_rng(0)
    z, phi, u = rng.uniform(-1, 1, 5000), rng.uniform(-np.pi, np.pi, 5000), rng.random(5000)
    bound = D.supremum_estimate(d)
    a, b = np.empty((5000, 3)), np.empty((5000, 3))
    na = compiled.rejection_accept(d.frame, d.coef, d.power, d.a, d.b, z, phi, u, bound, a, 0)
    nb = _pykernels.rejection_accept(d.frame, d.coef, d.power, d.a, d.b, z, phi, u, bound, b, 0)
    assert na == nb
    np.testing.assert_allclose(a[:na], b[:nb], atol=1e-15)


def test_pure_mode_env(monkeypatch):
    import importlib

    monkeypatch.setenv("OBVERSIM_PURE", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "numpy"
    finally:
        monkeypatch.delenv("OBVERSIM_PURE")
        importlib.reload(kernels)
