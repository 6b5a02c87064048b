"""Ensemble densities on the Bloch sphere and sampling from them.

Every density is stored in one normal form,

    f(p) = coef * (1 + z')**power * A(phi'),    p' = frame @ p,

with ``A(phi) = sum_k a_k cos(k phi) + b_k sin(k phi)`` a non-negative
trigonometric polynomial.  The built-in cases are

==========  ==============================================================
uniform     1 / (4 pi)
1a          (1 + z) / (4 pi)
1b          case 1a with its symmetry axis rotated to R(u, beta) z-hat
2a          (1 + cos theta)(1 + cos phi) / (4 pi)
2b          (1 + cos theta)(1 + cos(phi + pi/4)) / (4 pi)
3           (1 + cos theta)(2 + cos phi + sin 2 phi) / (8 pi)
==========  ==============================================================

and ``custom`` exposes the normal form directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .geometry import (
    SpherePoint,
    fibonacci_sphere,
    rotation_matrix,
    rotation_taking,
    unit_axis,
)
from .parallel import chunk_sizes, ordered_map, substream
from .quadrature import DEFAULT_RESOLUTION, Resolution, product_grid

FOUR_PI = 4.0 * math.pi
DENSITY_FLOOR = 1e-300
MIN_ACCEPTANCE = 1e-4
_BATCH = 1 << 16
_WARMUP = 1 << 16

BUILTIN_CASES = ("1a", "1b", "2a", "2b", "3")
KINDS = ("uniform",) + BUILTIN_CASES + ("custom",)
CASE1B_AXIS = (1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0), 0.0)
CASE1B_BETA = math.pi / 3.0


class PathologicalDensityError(RuntimeError):
    """Rejection sampling accepts too few proposals to be practical."""


@dataclass(frozen=True)
class AzimuthalFactor:
    """``ln A(phi)`` split into analytic pieces around the zeros of ``A``.

    ``A(phi) = |c_K| prod_j |e^{i phi} - r_j|``; roots on the unit circle are
    kept as angles so that ``ln A`` stays accurate right next to them.
    """

    log_lead: float
    zero_angles: np.ndarray
    zero_orders: np.ndarray
    other_roots: np.ndarray

    def log(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        out = np.full(phi.shape, self.log_lead)
        if len(self.other_roots):
            w = np.exp(1j * phi)
            for r in self.other_roots:
                out += np.log(np.abs(w - r))
        for ang, order in zip(self.zero_angles, self.zero_orders):
            out += order * np.log(2.0 * np.abs(np.sin(0.5 * (phi - ang))))
        return out


def _trig(a: np.ndarray, b: np.ndarray, phi, deriv: int = 0) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    out = np.zeros(phi.shape) + (a[0] if deriv == 0 else 0.0)
    for k in range(1, len(a)):
        c, s = np.cos(k * phi), np.sin(k * phi)
        if deriv == 0:
            out = out + a[k] * c + b[k] * s
        elif deriv == 1:
            out = out + k * (-a[k] * s + b[k] * c)
        else:
            out = out - k * k * (a[k] * c + b[k] * s)
    return out


def _factor(a: np.ndarray, b: np.ndarray) -> AzimuthalFactor:
    order = len(a) - 1
    if order == 0:
        return AzimuthalFactor(math.log(a[0]), np.empty(0), np.empty(0, int), np.empty(0, complex))
    # A(phi) = w^-K P(w), w = e^{i phi}; descending coefficients of P
    coeffs = [0.5 * (a[k] - 1j * b[k]) for k in range(order, 0, -1)]
    coeffs += [a[0]]
    coeffs += [0.5 * (a[k] + 1j * b[k]) for k in range(1, order + 1)]
    roots = np.roots(coeffs)
    lead = abs(coeffs[0])
    scale = float(abs(a[0]) + np.hypot(a[1:], b[1:]).sum())

    near = np.abs(np.abs(roots) - 1.0) < 1e-5
    others = list(roots[~near])
    angles = np.sort(np.angle(roots[near]))
    clusters: list[list[float]] = []
    for ang in angles:
        if clusters and abs(ang - clusters[-1][-1]) < 1e-4:
            clusters[-1].append(ang)
        else:
            clusters.append([ang])
    if len(clusters) > 1 and abs(clusters[0][0] + 2 * math.pi - clusters[-1][-1]) < 1e-4:
        clusters[0] = [x - 2 * math.pi for x in clusters.pop()] + clusters[0]

    zero_angles, zero_orders = [], []
    for group in clusters:
        phi0 = math.atan2(np.mean(np.sin(group)), np.mean(np.cos(group)))
        for _ in range(20):
            d2 = float(_trig(a, b, phi0, 2))
            if d2 == 0.0:
                break
            step = float(_trig(a, b, phi0, 1)) / d2
            phi0 -= step
            if abs(step) < 1e-16:
                break
        if len(group) % 2 == 0 and abs(float(_trig(a, b, phi0))) < 1e-12 * scale:
            zero_angles.append(math.remainder(phi0, 2 * math.pi))
            zero_orders.append(len(group))
        else:
            others.extend(r for r in roots[near] if any(abs(np.angle(r) - g) < 1e-9 for g in group))
    return AzimuthalFactor(
        math.log(lead),
        np.array(zero_angles, dtype=float),
        np.array(zero_orders, dtype=int),
        np.array(others, dtype=complex),
    )


@dataclass(frozen=True, eq=False)
class SphereDensity:
    kind: str
    coef: float
    power: int
    a: np.ndarray
    b: np.ndarray
    frame: np.ndarray = field(default_factory=lambda: np.eye(3))
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown density kind {self.kind!r}")
        if self.power < 0:
            raise ValueError("polar exponent must be >= 0")
        if not self.coef > 0:
            raise ValueError("normalisation constant must be positive")
        for name in ("a", "b", "frame"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if len(self.a) != len(self.b) or len(self.a) == 0:
            raise ValueError("harmonic coefficient arrays must be non-empty and equal length")

    @property
    def max_harmonic(self) -> int:
        return len(self.a) - 1

    @cached_property
    def azimuthal(self) -> AzimuthalFactor:
        return _factor(self.a, self.b)

    @property
    def has_pole_kink(self) -> bool:
        """True when ``f`` depends on ``phi'`` somewhere a pole is not a zero."""
        return bool(np.any(self.a[1:]) or np.any(self.b[1:]))

    def poles(self) -> np.ndarray:
        """The points mapped onto the native-frame poles (rows: north, south)."""
        return np.stack([self.frame[2], -self.frame[2]])

    def log_native(self, z, phi) -> np.ndarray:
        """``ln f`` at native-frame chart coordinates, accurate near zeros."""
        z = np.asarray(z, dtype=float)
        out = math.log(self.coef) + self.azimuthal.log(phi)
        if self.power:
            out = out + self.power * np.log1p(z)
        return out

    def descriptor(self) -> dict:
        out = {"kind": self.kind}
        out.update(self.params)
        return out

    def __repr__(self):
        return f"SphereDensity({self.descriptor()!r})"


def _product_case(kind, coef, power, harmonics, params=None, frame=None) -> SphereDensity:
    order = max(k for k, _, _ in harmonics)
    a = np.zeros(order + 1)
    b = np.zeros(order + 1)
    for k, ak, bk in harmonics:
        if k < 0 or int(k) != k:
            raise ValueError(f"harmonic index must be a non-negative integer, got {k!r}")
        a[int(k)] += ak
        b[int(k)] += bk
    b[0] = 0.0
    return SphereDensity(
        kind, coef, power, a, b, np.eye(3) if frame is None else frame, params or {}
    )


def uniform() -> SphereDensity:
    return _product_case("uniform", 1.0 / FOUR_PI, 0, [(0, 1.0, 0.0)])


def case1a() -> SphereDensity:
    return _product_case("1a", 1.0 / FOUR_PI, 1, [(0, 1.0, 0.0)])


def case1b(u=CASE1B_AXIS, beta: float = CASE1B_BETA) -> SphereDensity:
    """Case 1a with symmetry axis ``m = R(u, beta) z-hat``, i.e. ``(1 + m.p) / (4 pi)``."""
    u = unit_axis(u)
    m = rotation_matrix(u, beta) @ np.array([0.0, 0.0, 1.0])
    return _product_case(
        "1b",
        1.0 / FOUR_PI,
        1,
        [(0, 1.0, 0.0)],
        params={"u": [float(x) for x in u], "beta": float(beta)},
        frame=rotation_taking(m, (0.0, 0.0, 1.0)),
    )


def case2a() -> SphereDensity:
    return _product_case("2a", 1.0 / FOUR_PI, 1, [(0, 1.0, 0.0), (1, 1.0, 0.0)])


def case2b() -> SphereDensity:
    # cos(phi + pi/4) = cos(pi/4) cos(phi) - sin(pi/4) sin(phi)
    c = math.cos(math.pi / 4.0)
    s = math.sin(math.pi / 4.0)
    return _product_case("2b", 1.0 / FOUR_PI, 1, [(0, 1.0, 0.0), (1, c, -s)])


def case3() -> SphereDensity:
    return _product_case(
        "3", 1.0 / (8.0 * math.pi), 1, [(0, 2.0, 0.0), (1, 1.0, 0.0), (2, 0.0, 1.0)]
    )


def custom(polar_exponent: int, harmonics, normalization: float | None = None) -> SphereDensity:
    """``normalization * (1 + cos theta)**polar_exponent * sum_k (a_k cos k phi + b_k sin k phi)``.

    ``harmonics`` is a sequence of ``(k, a_k, b_k)``.  When ``normalization``
    is omitted the constant that makes the density integrate to one is used.
    The azimuthal factor must be non-negative.
    """
    harmonics = [(int(k), float(a), float(b)) for k, a, b in harmonics]
    if not harmonics:
        raise ValueError("custom density needs at least one harmonic")
    p = int(polar_exponent)
    if p != polar_exponent or p < 0:
        raise ValueError("polar_exponent must be a non-negative integer")
    a0 = sum(a for k, a, _ in harmonics if k == 0)
    if not a0 > 0:
        raise ValueError("the constant harmonic a_0 must be positive")
    if normalization is None:
        # int (1+z)^p dz = 2^(p+1)/(p+1); int A dphi = 2 pi a_0
        normalization = (p + 1) / (2.0 ** (p + 1) * 2.0 * math.pi * a0)
    d = _product_case(
        "custom",
        float(normalization),
        p,
        harmonics,
        params={
            "polar_exponent": p,
            "harmonics": [list(h) for h in harmonics],
            "normalization": float(normalization),
        },
    )
    phi = np.linspace(-math.pi, math.pi, 8192, endpoint=False)
    scale = float(abs(d.a[0]) + np.hypot(d.a[1:], d.b[1:]).sum())
    if _trig(d.a, d.b, phi).min() < -1e-12 * scale:
        raise ValueError("azimuthal factor takes negative values")
    return d


_BUILDERS = {
    "uniform": uniform,
    "1a": case1a,
    "1b": case1b,
    "2a": case2a,
    "2b": case2b,
    "3": case3,
}


def builtin(name: str) -> SphereDensity:
    key = str(name).lower().removeprefix("case")
    try:
        return _BUILDERS[key]()
    except KeyError:
        raise ValueError(f"unknown built-in density {name!r}") from None


def from_descriptor(desc: dict) -> SphereDensity:
    desc = dict(desc)
    kind = str(desc.pop("kind")).lower().removeprefix("case")
    if kind == "1b":
        return case1b(desc.pop("u", CASE1B_AXIS), desc.pop("beta", CASE1B_BETA))
    if kind == "custom":
        return custom(desc.pop("polar_exponent"), desc.pop("harmonics"), desc.pop("normalization", None))
    return builtin(kind)


def rotated(d: SphereDensity, rotation_matrix_: np.ndarray) -> SphereDensity:
    """The density carried along by a rotation: ``g(R p) = f(p)``."""
    r = np.asarray(rotation_matrix_, dtype=float)
    params = dict(d.params)
    params["rotated_by"] = r.tolist()
    return SphereDensity(d.kind, d.coef, d.power, d.a, d.b, d.frame @ r.T, params)


def _points(pts) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(pts, dtype=float).reshape(-1, 3))


def values(d: SphereDensity, pts) -> np.ndarray:
    """Density at each row of an ``(n, 3)`` array."""
    pts = _points(pts)
    out = np.empty(len(pts))
    kernels.density_values(d.frame, d.coef, d.power, d.a, d.b, pts, out)
    return out


def evaluate(d: SphereDensity, p: SpherePoint) -> float:
    return float(values(d, (p.x, p.y, p.z))[0])


def normalization_integral(d: SphereDensity, resolution: Resolution = DEFAULT_RESOLUTION) -> float:
    """Integral of ``d`` over the sphere on the product grid of its native frame."""
    rule = product_grid(resolution)
    pts = rule.points @ d.frame
    return float(rule.weights @ values(d, pts))


def minimum_on_grid(d: SphereDensity, n: int = 10_000) -> float:
    return float(values(d, fibonacci_sphere(n)).min())


def supremum_estimate(d: SphereDensity) -> float:
    """An upper bound on ``max f``.

    The azimuthal maximum is bounded both by the sum of harmonic amplitudes
    and by a 4096-point scan with a (1 + 1e-3) safety factor plus the
    curvature bound on what the scan can miss; the smaller bound is used.
    """
    amp = np.hypot(d.a[1:], d.b[1:])
    az_bound = float(d.a[0] + amp.sum())
    if len(amp):
        n = 4096
        h = 2.0 * math.pi / n
        phi = -math.pi + h * np.arange(n)
        curvature = float((np.arange(1, len(d.a)) ** 2 * amp).sum())
        scan = float(_trig(d.a, d.b, phi).max()) * (1.0 + 1e-3) + h * h / 8.0 * curvature
        az_bound = min(az_bound, scan)
    return d.coef * 2.0**d.power * az_bound


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Rejection-sampled ensemble; ``points`` has shape ``(n, 3)``."""

    points: np.ndarray
    seed: int
    density: dict

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i) -> SpherePoint:
        x, y, z = self.points[i]
        return SpherePoint(float(x), float(y), float(z))

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def sample_chunk(d: SphereDensity, size: int, seed: int, index: int) -> np.ndarray:
    """Chunk ``index`` of the sample stream for ``(d, seed)``.

    Uniform proposals (``z ~ U(-1, 1)``, ``phi ~ U(-pi, pi)``) are accepted
    with probability ``f / M``.  The chunk depends only on its arguments.
    """
    rng = substream(seed, index)
    bound = supremum_estimate(d)
    out = np.empty((size, 3))
    filled = proposed = 0
    while filled < size:
        z = rng.uniform(-1.0, 1.0, _BATCH)
        phi = rng.uniform(-math.pi, math.pi, _BATCH)
        u = rng.random(_BATCH)
        new = kernels.rejection_accept(d.frame, d.coef, d.power, d.a, d.b, z, phi, u, bound, out, filled)
        if new < size:
            proposed += _BATCH
            if proposed >= _WARMUP and new / proposed < MIN_ACCEPTANCE:
                raise PathologicalDensityError(
                    f"acceptance rate {new / proposed:.2e} below {MIN_ACCEPTANCE:g} "
                    f"for {d!r}"
                )
        filled = new
    return out


def sample(d: SphereDensity, n: int, seed: int, threads: int | None = None) -> SampleSet:
    if n < 0:
        raise ValueError("sample size must be >= 0")
    sizes = chunk_sizes(n)
    parts = ordered_map(lambda i, size: sample_chunk(d, size, seed, i), sizes, threads)
    pts = np.concatenate(parts) if parts else np.empty((0, 3))
    pts.setflags(write=False)
    return SampleSet(pts, int(seed), d.descriptor())
