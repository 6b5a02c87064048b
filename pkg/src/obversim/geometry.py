"""Points, rotations and reflections on the Bloch sphere.

Configurations of a two-level system are points on the unit sphere with
``x = sin(theta) cos(phi)``, ``y = sin(theta) sin(phi)``, ``z = cos(theta)``.
Deterministic unitary evolution acts on them as a proper rotation, complex
conjugation of the state acts as the mirror ``phi -> -phi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

AXIS_TOLERANCE = 1e-9
UNIT_TOLERANCE = 1e-12

# Levi-Civita symbol eps[j, k, l]
LEVI_CIVITA = np.zeros((3, 3, 3))
for _j, _k, _l in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_j, _k, _l] = 1.0
    LEVI_CIVITA[_k, _j, _l] = -1.0

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


class InvalidAxisError(ValueError):
    """Raised for a zero-length or non-normalised rotation axis."""


def unit_axis(axis) -> np.ndarray:
    """Return ``axis`` as a float array of unit length.

    Inputs whose norm is within ``AXIS_TOLERANCE`` of one are silently
    renormalised; anything else is rejected.
    """
    v = np.asarray(axis, dtype=float).reshape(3)
    norm = float(np.linalg.norm(v))
    if not np.all(np.isfinite(v)) or norm == 0.0:
        raise InvalidAxisError(f"axis must be a non-zero finite 3-vector, got {v.tolist()}")
    if abs(norm - 1.0) > AXIS_TOLERANCE:
        raise InvalidAxisError(f"axis must have unit length (|axis| = {norm!r})")
    return v / norm


def orthonormal_complement(axis) -> tuple[np.ndarray, np.ndarray]:
    """Two unit vectors that together with ``axis`` form a right-handed frame."""
    n = np.asarray(axis, dtype=float)
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(n)))] = 1.0
    e1 = np.cross(n, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


@dataclass(frozen=True)
class SpherePoint:
    """A configuration on the unit sphere, stored in Cartesian form."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        r2 = self.x * self.x + self.y * self.y + self.z * self.z
        if not abs(r2 - 1.0) <= UNIT_TOLERANCE:
            raise ValueError(f"point is not on the unit sphere (|p|^2 = {r2!r})")

    @classmethod
    def from_vector(cls, v) -> "SpherePoint":
        v = np.asarray(v, dtype=float).reshape(3)
        v = v / np.linalg.norm(v)
        return cls(float(v[0]), float(v[1]), float(v[2]))

    @classmethod
    def from_spherical(cls, theta: float, phi: float) -> "SpherePoint":
        s = math.sin(theta)
        return cls(s * math.cos(phi), s * math.sin(phi), math.cos(theta))

    @property
    def theta(self) -> float:
        return math.atan2(math.hypot(self.x, self.y), self.z)

    @property
    def phi(self) -> float:
        # atan2(+-0, x) would give +-pi or -0 on the z-axis; poles report 0
        if self.x == 0.0 and self.y == 0.0:
            return 0.0
        phi = math.atan2(self.y, self.x)
        return math.pi if phi == -math.pi else phi

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def distance(self, other: "SpherePoint") -> float:
        """Great-circle distance."""
        a, b = self.as_array(), other.as_array()
        return math.atan2(np.linalg.norm(np.cross(a, b)), float(a @ b))


def rotation_matrix(axis, angle: float) -> np.ndarray:
    """Component form of the SO(3) rotation by ``angle`` about unit ``axis``.

    ``R[j, k] = cos^2(t/2) + sin^2(t/2) (2 n_j^2 - 1)`` on the diagonal and
    ``2 n_j n_k sin^2(t/2) - eps_jkl n_l sin t`` off it (right-hand rule).
    """
    n = unit_axis(axis)
    c2 = math.cos(angle / 2.0) ** 2
    s2 = math.sin(angle / 2.0) ** 2
    st = math.sin(angle)
    m = 2.0 * s2 * np.outer(n, n) - st * np.einsum("jkl,l->jk", LEVI_CIVITA, n)
    m[np.diag_indices(3)] = c2 + s2 * (2.0 * n * n - 1.0)
    return m


@dataclass(frozen=True)
class Rotation:
    axis: np.ndarray
    angle: float
    matrix: np.ndarray = field(repr=False)

    def inverse(self) -> "Rotation":
        return rotation_from_axis_angle(self.axis, -self.angle)

    def then(self, other: "Rotation") -> np.ndarray:
        """Matrix of ``self`` followed by ``other``."""
        return other.matrix @ self.matrix


def rotation_from_axis_angle(axis, angle: float) -> Rotation:
    n = unit_axis(axis)
    m = rotation_matrix(n, angle)
    n.setflags(write=False)
    m.setflags(write=False)
    return Rotation(axis=n, angle=float(angle), matrix=m)


def identity_rotation() -> Rotation:
    return rotation_from_axis_angle((0.0, 0.0, 1.0), 0.0)


def apply(rotation: Rotation, p: SpherePoint) -> SpherePoint:
    return SpherePoint.from_vector(rotation.matrix @ p.as_array())


def conjugate(p: SpherePoint) -> SpherePoint:
    """Complex conjugation of the state, ``phi -> -phi``."""
    return SpherePoint(p.x, -p.y, p.z)


@dataclass(frozen=True)
class Reflection:
    """Mirror in the plane through the origin with unit normal ``plane_normal``."""

    plane_normal: np.ndarray

    def __post_init__(self):
        m = unit_axis(self.plane_normal)
        m.setflags(write=False)
        object.__setattr__(self, "plane_normal", m)

    @property
    def matrix(self) -> np.ndarray:
        m = self.plane_normal
        return np.eye(3) - 2.0 * np.outer(m, m)

    def apply_many(self, pts: np.ndarray) -> np.ndarray:
        m = self.plane_normal
        return pts - 2.0 * (pts @ m)[:, None] * m


def reflect(r: Reflection, p: SpherePoint) -> SpherePoint:
    v = p.as_array()
    m = r.plane_normal
    return SpherePoint.from_vector(v - 2.0 * float(m @ v) * m)


@dataclass(frozen=True)
class Su2Matrix:
    """A 2x2 special unitary matrix ``[[a, b], [c, d]]``."""

    a: complex
    b: complex
    c: complex
    d: complex

    @property
    def array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    def adjoint_action(self) -> np.ndarray:
        """SO(3) matrix ``R`` with ``U (v.sigma) U^dagger = (R v).sigma``."""
        u = self.array
        ud = u.conj().T
        out = np.empty((3, 3))
        for k in range(3):
            for j in range(3):
                out[k, j] = 0.5 * np.trace(PAULI[k] @ u @ PAULI[j] @ ud).real
        return out

    def act(self, p: SpherePoint) -> SpherePoint:
        """Evolve the pure state with Bloch vector ``p`` and return its new Bloch vector."""
        psi = np.array(
            [math.cos(p.theta / 2.0), np.exp(1j * p.phi) * math.sin(p.theta / 2.0)]
        )
        out = self.array @ psi
        bloch = [float(np.real(out.conj() @ s @ out)) for s in PAULI]
        return SpherePoint.from_vector(bloch)


def su2_from_rotation(axis, angle: float) -> Su2Matrix:
    """``I cos(angle/2) - i (n . sigma) sin(angle/2)``."""
    n = unit_axis(axis)
    u = np.eye(2) * math.cos(angle / 2.0) - 1j * math.sin(angle / 2.0) * np.einsum(
        "i,ijk->jk", n, PAULI
    )
    return Su2Matrix(complex(u[0, 0]), complex(u[0, 1]), complex(u[1, 0]), complex(u[1, 1]))


def rotation_taking(src, dst) -> np.ndarray:
    """A rotation matrix mapping unit vector ``src`` onto unit vector ``dst``."""
    a = unit_axis(src)
    b = unit_axis(dst)
    cross = np.cross(a, b)
    s = float(np.linalg.norm(cross))
    c = float(a @ b)
    if s < 1e-15:
        if c > 0:
            return np.eye(3)
        e1, _ = orthonormal_complement(a)
        return rotation_matrix(e1, math.pi)
    return rotation_matrix(cross / s, math.atan2(s, c))


def to_cartesian(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    s = np.sin(theta)
    return np.stack([s * np.cos(phi), s * np.sin(phi), np.cos(theta)], axis=-1)


def to_spherical(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(pts, dtype=float)
    rho = np.hypot(pts[..., 0], pts[..., 1])
    theta = np.arctan2(rho, pts[..., 2])
    phi = np.where(rho == 0.0, 0.0, np.arctan2(pts[..., 1], pts[..., 0]))
    phi = np.where(phi == -np.pi, np.pi, phi)
    return theta, phi


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` nearly uniform points on the sphere (golden-angle spiral), shape ``(n, 3)``."""
    i = np.arange(n, dtype=float) + 0.5
    z = 1.0 - 2.0 * i / n
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    ang = math.pi * (3.0 - math.sqrt(5.0)) * i
    return np.stack([rho * np.cos(ang), rho * np.sin(ang), z], axis=1)


def random_points(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
