"""Pure-Python/numpy versions of the hot kernels in ``_core.pyx``.

Selected by :mod:`foliation_lab.kernels` when the compiled extension is not
importable (or when ``FOLIATION_LAB_PURE=1``). Signatures and return
conventions match the compiled module exactly.
"""
import numpy as np
from scipy.integrate import solve_ivp
from scipy.signal import convolve2d

STATUS_OK = 0
STATUS_COLLAPSE = 1
STATUS_MAX_STEPS = 2


def mul2(a, b, order):
    """Truncated product of two triangular coefficient arrays."""
    full = convolve2d(a, b)[: order + 1, : order + 1]
    out = np.zeros((order + 1, order + 1), dtype=complex)
    out[: full.shape[0], : full.shape[1]] = full
    i, j = np.indices(out.shape)
    out[i + j > order] = 0.0
    return out


def polyval2(c, z, w):
    """Evaluate sum c[i, j] z**i w**j (Horner in both variables)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    result = np.zeros(np.broadcast(z, w).shape, dtype=complex)
    for i in range(c.shape[0] - 1, -1, -1):
        row = np.zeros_like(result)
        for j in range(c.shape[1] - 1, -1, -1):
            row = row * w + c[i, j]
        result = result * z + row
    return result


def _path(kind, alpha, beta, gamma, delta, zeta0, theta):
    if kind == 0:
        zeta = zeta0 * np.exp(1j * theta)
        den = gamma * zeta + delta
        w = (alpha * zeta + beta) / den
        dw = (alpha * delta - beta * gamma) / den**2 * 1j * zeta
        return w, dw
    return alpha + theta * beta, beta


def integrate_leaves(P, Q, kind, alpha, beta, gamma, delta, zeta0,
                     theta0, theta1, z0, rtol, atol, tube, max_steps):
    """Integrate dz/dtheta = -P(z, w)/Q(z, w) * dw/dtheta for every sample.

    Returns ``(z_end, err_est, status)`` arrays of the sample length.
    """
    z0 = np.asarray(z0, dtype=complex)
    n = z0.size
    status = np.zeros(n, dtype=np.int64)
    if theta1 == theta0:
        return z0.copy(), np.zeros(n), status

    def rhs(theta, z):
        w, dw = _path(kind, alpha, beta, gamma, delta, zeta0, theta)
        q = polyval2(Q, z, w)
        q = np.where(np.abs(q) < 1e-300, np.nan, q)
        return -polyval2(P, z, w) / q * dw

    def escape(theta, z):
        return tube - np.max(np.abs(z))

    escape.terminal = True
    with np.errstate(all="ignore"):
        sol = solve_ivp(rhs, (theta0, theta1), z0, method="DOP853", rtol=rtol,
                        atol=atol, events=escape)
    z_end = sol.y[:, -1]
    ok = sol.status == 0 and np.all(np.isfinite(z_end))
    if not ok:
        status[:] = STATUS_COLLAPSE
    err = np.full(n, rtol * 1.0) * (np.abs(z_end) + atol / max(rtol, 1e-300))
    return z_end, err, status
