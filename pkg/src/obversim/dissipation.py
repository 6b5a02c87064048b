"""Dissipation production for rotations of a Bloch-sphere ensemble.

For a configuration ``p`` evolved to ``R p`` the dissipation production is
``omega = ln f(p) - ln f(R p)``; rotations preserve area, so no Jacobian
enters.  Ensemble means are computed by quadrature in the density's native
frame using

    <omega_t> = int f ln f - int f ln(f o R) = int (f - f o R^-1) ln f dOmega,

which leaves every logarithmic singularity on a fixed coordinate line of
the chart (see :func:`obversim.quadrature.panel_grid`).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .density import DENSITY_FLOOR, SphereDensity, values
from .geometry import Rotation, SpherePoint, rotation_from_axis_angle
from .parallel import ordered_map
from .quadrature import (
    DEFAULT_RESOLUTION,
    Resolution,
    SphereRule,
    breaks_for_points,
    panel_grid,
)

log = logging.getLogger(__name__)

CONVERGENCE_TOLERANCE = 1e-8


class ZeroProbabilityOriginError(ValueError):
    """The starting configuration lies where the initial density vanishes."""


def omega_values(d: SphereDensity, rotation: Rotation, pts, floor: float = DENSITY_FLOOR) -> np.ndarray:
    """Dissipation production at every row of ``pts``; ``+inf`` where ``f(R p)`` vanishes."""
    pts = np.ascontiguousarray(np.asarray(pts, dtype=float).reshape(-1, 3))
    out = np.empty(len(pts))
    bad = kernels.omega_values(
        d.frame, d.coef, d.power, d.a, d.b, np.ascontiguousarray(rotation.matrix), pts, floor, out
    )
    if bad:
        raise ZeroProbabilityOriginError(
            f"{bad} starting point(s) have initial density below {floor:g}"
        )
    return out


def omega_of_point(d: SphereDensity, rotation: Rotation, p: SpherePoint) -> float:
    return float(omega_values(d, rotation, (p.x, p.y, p.z))[0])


def _rule(d: SphereDensity, kinks, resolution: Resolution) -> SphereRule:
    """Panel rule in ``d``'s native chart, broken at its zero lines and at ``kinks``.

    ``kinks`` are points (in the lab frame) where the non-logarithmic factor
    of the integrand fails to be smooth.
    """
    phi_breaks = list(d.azimuthal.zero_angles)
    z_breaks: list[float] = []
    if d.has_pole_kink and len(kinks):
        zb, pb = breaks_for_points(np.asarray(kinks) @ d.frame.T)
        z_breaks += zb
        phi_breaks += pb
    return panel_grid(z_breaks, phi_breaks, resolution)


def mean_omega(
    d: SphereDensity, rotation: Rotation, resolution: Resolution = DEFAULT_RESOLUTION
) -> float:
    """Ensemble mean of the dissipation production (a KL divergence, never negative)."""
    r = rotation.matrix
    # f o R^-1 kinks where R^-1 p hits a pole of f, i.e. at R(pole)
    rule = _rule(d, d.poles() @ r.T, resolution)
    pts = rule.points @ d.frame
    f = values(d, pts)
    f_back = values(d, pts @ r)
    return float(rule.weights @ ((f - f_back) * d.log_native(rule.z, rule.phi)))


def integral_fluctuation_check(
    d: SphereDensity, rotation: Rotation, resolution: Resolution = DEFAULT_RESOLUTION
) -> float:
    """Quadrature of ``<exp(-omega_t)> = int f(R p) dOmega``; equals one exactly."""
    r = rotation.matrix
    rule = _rule(d, d.poles() @ r, resolution)
    pts = rule.points @ d.frame
    return float(rule.weights @ values(d, pts @ r.T))


def convergence_drift(
    d: SphereDensity, rotation: Rotation, resolution: Resolution = DEFAULT_RESOLUTION
) -> float:
    """Change in :func:`mean_omega` when the resolution is doubled."""
    return abs(mean_omega(d, rotation, resolution) - mean_omega(d, rotation, resolution.doubled()))


@dataclass(frozen=True)
class MeanCurve:
    times: np.ndarray
    means: np.ndarray
    ifr: np.ndarray
    resolution: Resolution

    def __len__(self):
        return len(self.times)


def mean_curve(
    d: SphereDensity,
    axis,
    times,
    resolution: Resolution = DEFAULT_RESOLUTION,
    threads: int | None = None,
) -> MeanCurve:
    """``<omega_t>`` (and ``<exp(-omega_t)>``) for rotations by each time about ``axis``.

    Negative times rotate the other way, i.e. evolve into the past.
    """
    times = np.asarray(times, dtype=float).ravel()

    def one(_, t):
        rot = rotation_from_axis_angle(axis, float(t))
        return mean_omega(d, rot, resolution), integral_fluctuation_check(d, rot, resolution)

    pairs = ordered_map(one, times, threads)
    means = np.array([m for m, _ in pairs])
    ifr = np.array([v for _, v in pairs])
    if len(means) and means.min() < -1e-9:
        log.warning("mean dissipation below -1e-9 (%g); quadrature is under-resolved", means.min())
    return MeanCurve(times, means, ifr, resolution)


def asymmetry(
    d: SphereDensity, axis, t: float, resolution: Resolution = DEFAULT_RESOLUTION
) -> float:
    """``<omega_t> - <omega_-t>``: zero whenever past and future look alike on average."""
    fwd = mean_omega(d, rotation_from_axis_angle(axis, t), resolution)
    bwd = mean_omega(d, rotation_from_axis_angle(axis, -t), resolution)
    return fwd - bwd


def monte_carlo_mean(omegas: np.ndarray) -> tuple[float, float, int]:
    """Mean, standard error and number of infinite values of a sample of omegas."""
    omegas = np.asarray(omegas, dtype=float)
    finite = omegas[np.isfinite(omegas)]
    n_inf = len(omegas) - len(finite)
    if len(finite) < 2:
        return float(np.mean(finite)) if len(finite) else math.nan, math.inf, n_inf
    return float(finite.mean()), float(finite.std(ddof=1) / math.sqrt(len(finite))), n_inf
