"""Quadrature rules on the unit sphere in ``(z = cos theta, phi)`` coordinates.

Two rules are provided.  :func:`product_grid` (Gauss-Legendre in ``z`` times
the trapezoid rule in ``phi``) is exact for products of polynomials in ``z``
and trigonometric polynomials in ``phi`` and is what normalisation checks use.
:func:`panel_grid` splits both coordinates at caller-supplied breakpoints and
applies tanh-sinh on every panel; it keeps spectral accuracy for integrands
with logarithmic singularities along coordinate lines and kinks at isolated
points, provided those sit on panel boundaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# Smallest fractional offset of a tanh-sinh node from a panel end.
_EDGE = 1e-15


@dataclass(frozen=True)
class Resolution:
    """Node counts: ``n_theta`` in ``z`` and ``n_phi`` in ``phi`` (per panel for panel rules)."""

    n_theta: int = 64
    n_phi: int = 128

    def __post_init__(self):
        if self.n_theta < 2 or self.n_phi < 2:
            raise ValueError("resolution needs at least 2 nodes per direction")

    def doubled(self) -> "Resolution":
        return Resolution(2 * self.n_theta, 2 * self.n_phi)


DEFAULT_RESOLUTION = Resolution()


@dataclass(frozen=True)
class SphereRule:
    z: np.ndarray
    phi: np.ndarray
    weights: np.ndarray

    @property
    def points(self) -> np.ndarray:
        s = np.sqrt(np.maximum(0.0, 1.0 - self.z * self.z))
        return np.stack([s * np.cos(self.phi), s * np.sin(self.phi), self.z], axis=1)

    def __len__(self):
        return len(self.weights)


def _tensor(z, wz, phi, wphi) -> SphereRule:
    zz, pp = np.meshgrid(z, phi, indexing="ij")
    return SphereRule(zz.ravel(), pp.ravel(), np.outer(wz, wphi).ravel())


@lru_cache(maxsize=32)
def _product(n_theta: int, n_phi: int) -> SphereRule:
    z, wz = np.polynomial.legendre.leggauss(n_theta)
    phi = -math.pi + 2.0 * math.pi * (np.arange(n_phi) + 0.5) / n_phi
    return _tensor(z, wz, phi, np.full(n_phi, 2.0 * math.pi / n_phi))


def product_grid(resolution: Resolution = DEFAULT_RESOLUTION) -> SphereRule:
    return _product(resolution.n_theta, resolution.n_phi)


@lru_cache(maxsize=32)
def _tanh_sinh_unit(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fractional positions ``s``, ``1 - s`` and weights on ``[0, 1]``."""
    u_max = 0.5 * math.log(1.0 / _EDGE)
    t_max = math.asinh(2.0 * u_max / math.pi)
    t = np.linspace(-t_max, t_max, n)
    h = t[1] - t[0]
    u = 0.5 * math.pi * np.sinh(t)
    s = 1.0 / (1.0 + np.exp(-2.0 * u))
    s_c = 1.0 / (1.0 + np.exp(2.0 * u))
    w = h * math.pi * np.cosh(t) * s * s_c
    return s, s_c, w


def tanh_sinh(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``n`` tanh-sinh nodes and weights on ``[a, b]``, none on the endpoints."""
    s, s_c, w = _tanh_sinh_unit(n)
    length = b - a
    x = np.where(s < 0.5, a + length * s, b - length * s_c)
    # short panels would otherwise round their outer nodes onto the ends
    x = np.clip(x, np.nextafter(a, b), np.nextafter(b, a))
    return x, length * w


def _panels(lo: float, hi: float, breaks, n: int, min_width: float = 1e-13):
    edges = np.unique(np.clip(np.concatenate([[lo, hi], np.asarray(breaks, float)]), lo, hi))
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a <= min_width:
            continue
        x, w = tanh_sinh(a, b, n)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def wrap_angle(phi):
    """Map angles into ``(-pi, pi]``."""
    out = np.mod(np.asarray(phi, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    return np.where(out == -math.pi, math.pi, out)


def panel_grid(
    z_breaks=(),
    phi_breaks=(),
    resolution: Resolution = DEFAULT_RESOLUTION,
) -> SphereRule:
    z, wz = _panels(-1.0, 1.0, z_breaks, resolution.n_theta)
    phi, wphi = _panels(-math.pi, math.pi, wrap_angle(list(phi_breaks)), resolution.n_phi)
    return _tensor(z, wz, phi, wphi)


def breaks_for_points(points) -> tuple[list[float], list[float]]:
    """Chart coordinates of isolated points, used as panel breakpoints."""
    zs, phis = [], []
    for p in np.atleast_2d(np.asarray(points, dtype=float)):
        zs.append(float(np.clip(p[2], -1.0, 1.0)))
        if math.hypot(p[0], p[1]) > 0.0:
            phis.append(math.atan2(p[1], p[0]))
    return zs, phis
