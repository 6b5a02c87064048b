"""NumPy implementations of the inner loops in ``_kernels.pyx``.

Used when the compiled extension is unavailable or ``OBVERSIM_PURE=1``.
Results agree with the compiled kernels to a few ulps, not bit for bit.
"""
import numpy as np

BACKEND = "numpy"


def _density(frame, coef, power, a, b, pts):
    q = pts @ np.asarray(frame).T
    rho = np.sqrt(q[:, 0] * q[:, 0] + q[:, 1] * q[:, 1])
    safe = rho > 0.0
    c1 = np.where(safe, q[:, 0] / np.where(safe, rho, 1.0), 1.0)
    s1 = np.where(safe, q[:, 1] / np.where(safe, rho, 1.0), 0.0)
    # 1 + qz = rho^2 / (1 - qz) keeps relative accuracy near the south pole
    lift = np.where(q[:, 2] >= 0.0, 1.0 + q[:, 2], rho * rho / (1.0 - np.minimum(q[:, 2], 0.0)))
    polar = np.ones(len(q))
    for _ in range(power):
        polar *= lift
    az = np.full(len(q), a[0])
    ck = np.ones(len(q))
    sk = np.zeros(len(q))
    for k in range(1, len(a)):
        ck, sk = ck * c1 - sk * s1, sk * c1 + ck * s1
        az += a[k] * ck + b[k] * sk
    return np.maximum(coef * polar * az, 0.0)


def density_values(frame, coef, power, a, b, pts, out):
    out[:] = _density(frame, coef, power, a, b, np.asarray(pts))


def omega_values(frame, coef, power, a, b, rot, pts, floor, out):
    pts = np.asarray(pts)
    fa = _density(frame, coef, power, a, b, pts)
    fb = _density(frame, coef, power, a, b, pts @ np.asarray(rot).T)
    bad = fa < floor
    with np.errstate(divide="ignore", invalid="ignore"):
        om = np.log(fa / fb)
    om[fb < floor] = np.inf
    om[bad] = np.nan
    out[:] = om
    return int(bad.sum())


def rejection_accept(frame, coef, power, a, b, z, phi, u, bound, out, start):
    s = np.sqrt(1.0 - z * z)
    pts = np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    keep = pts[u * bound < _density(frame, coef, power, a, b, pts)]
    take = min(len(keep), out.shape[0] - start)
    out[start:start + take] = keep[:take]
    return start + take
