import math

import numpy as np
import pytest

from obversim.quadrature import (
    Resolution,
    breaks_for_points,
    panel_grid,
    product_grid,
    tanh_sinh,
    wrap_angle,
)


def test_product_grid_integrates_harmonics_exactly():
    rule = product_grid()
    assert rule.weights.sum() == pytest.approx(4 * math.pi, rel=1e-15)
    z, phi, w = rule.z, rule.phi, rule.weights
    assert w @ (z**2) == pytest.approx(4 * math.pi / 3, rel=1e-14)
    assert abs(w @ (np.cos(3 * phi) * (1 + z) ** 5)) < 1e-13


def test_tanh_sinh_handles_endpoint_log_singularity():
    x, w = tanh_sinh(0.0, 1.0, 64)
    assert x.min() > 0.0 and x.max() < 1.0
    assert w @ np.log(x) == pytest.approx(-1.0, abs=1e-13)
    x, w = tanh_sinh(-2.0, 3.0, 48)
    assert w @ x**2 == pytest.approx(35 / 3, rel=1e-14)


def test_panel_grid_area_and_breaks():
    rule = panel_grid([0.3, 0.3, -1.0], [1.0, 4.0], Resolution(64, 64))
    assert rule.weights.sum() == pytest.approx(4 * math.pi, rel=1e-14)
    assert np.all(np.abs(rule.z) < 1)
    # log singularity along phi = 1 is integrated to near machine precision
    got = rule.weights @ np.log(np.abs(2 * np.sin((rule.phi - 1.0) / 2)))
    assert abs(got) < 1e-12


def test_wrap_angle():
    np.testing.assert_allclose(wrap_angle([math.pi, -math.pi, 3 * math.pi, 0.5]), [math.pi, math.pi, math.pi, 0.5])


def test_breaks_for_points():
    zs, phis = breaks_for_points([[0, 0, 1], [0, 1, 0]])
    assert zs == [1.0, 0.0]
    assert phis == [pytest.approx(math.pi / 2)]


def test_resolution_validation():
    with pytest.raises(ValueError):
        Resolution(1, 10)
    assert Resolution(3, 5).doubled() == Resolution(6, 10)
