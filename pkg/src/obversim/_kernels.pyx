# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for density evaluation, dissipation and rejection sampling.

Every density is ``coef * (1 + z')**power * sum_k(a_k cos k phi' + b_k sin k phi')``
in a frame ``p' = frame @ p``.  Signatures mirror :mod:`obversim._pykernels`.
"""
from libc.math cimport log, sqrt, cos, sin, INFINITY

BACKEND = "cython"


cdef inline double _density(const double[:, ::1] frame, double coef, int power,
                            const double[::1] a, const double[::1] b,
                            double x, double y, double z) nogil:
    cdef double qx = frame[0, 0] * x + frame[0, 1] * y + frame[0, 2] * z
    cdef double qy = frame[1, 0] * x + frame[1, 1] * y + frame[1, 2] * z
    cdef double qz = frame[2, 0] * x + frame[2, 1] * y + frame[2, 2] * z
    cdef double rho = sqrt(qx * qx + qy * qy)
    cdef double c1 = 1.0, s1 = 0.0, ck = 1.0, sk = 0.0, tmp
    cdef double polar = 1.0, az, lift
    cdef Py_ssize_t k, nk = a.shape[0]
    cdef int i
    if rho > 0.0:
        c1 = qx / rho
        s1 = qy / rho
    # 1 + qz = rho^2 / (1 - qz) keeps relative accuracy near the south pole
    lift = 1.0 + qz if qz >= 0.0 else rho * rho / (1.0 - qz)
    for i in range(power):
        polar *= lift
    az = a[0]
    for k in range(1, nk):
        tmp = ck * c1 - sk * s1
        sk = sk * c1 + ck * s1
        ck = tmp
        az += a[k] * ck + b[k] * sk
    az = coef * polar * az
    return az if az > 0.0 else 0.0


def density_values(const double[:, ::1] frame, double coef, int power,
                   const double[::1] a, const double[::1] b,
                   const double[:, ::1] pts, double[::1] out):
    cdef Py_ssize_t i, n = pts.shape[0]
    with nogil:
        for i in range(n):
            out[i] = _density(frame, coef, power, a, b, pts[i, 0], pts[i, 1], pts[i, 2])


def omega_values(const double[:, ::1] frame, double coef, int power,
                 const double[::1] a, const double[::1] b,
                 const double[:, ::1] rot, const double[:, ::1] pts,
                 double floor, double[::1] out):
    """Write ``ln f(p) - ln f(R p)``; return how many origins fall below ``floor``.

    Origins below the floor get NaN, evolved points below it get +inf.
    """
    cdef Py_ssize_t i, n = pts.shape[0]
    cdef Py_ssize_t bad = 0
    cdef double x, y, z, fa, fb
    with nogil:
        for i in range(n):
            x = pts[i, 0]
            y = pts[i, 1]
            z = pts[i, 2]
            fa = _density(frame, coef, power, a, b, x, y, z)
            fb = _density(frame, coef, power, a, b,
                          rot[0, 0] * x + rot[0, 1] * y + rot[0, 2] * z,
                          rot[1, 0] * x + rot[1, 1] * y + rot[1, 2] * z,
                          rot[2, 0] * x + rot[2, 1] * y + rot[2, 2] * z)
            if fa < floor:
                out[i] = 0.0 / 0.0
                bad += 1
            elif fb < floor:
                out[i] = INFINITY
            else:
                out[i] = log(fa / fb)
    return bad


def rejection_accept(const double[:, ::1] frame, double coef, int power,
                     const double[::1] a, const double[::1] b,
                     const double[::1] z, const double[::1] phi, const double[::1] u,
                     double bound, double[:, ::1] out, Py_ssize_t start):
    """Accept uniform proposals ``(z, phi)`` when ``u * bound < f``.

    Accepted points are written to ``out`` from row ``start`` until it is
    full; returns the next free row.
    """
    cdef Py_ssize_t i, n = z.shape[0], j = start, cap = out.shape[0]
    cdef double s, x, y
    with nogil:
        for i in range(n):
            if j >= cap:
                break
            s = sqrt(1.0 - z[i] * z[i])
            x = s * cos(phi[i])
            y = s * sin(phi[i])
            if u[i] * bound < _density(frame, coef, power, a, b, x, y, z[i]):
                out[j, 0] = x
                out[j, 1] = y
                out[j, 2] = z[i]
                j += 1
    return j
