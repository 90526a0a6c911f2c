# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: truncated bivariate products and the leaf ODE.

The leaf integrator is an embedded 8(5,3) Dormand-Prince stepper run
independently for every sample point, each with its own step size.
The Butcher tableau is taken from scipy at import time.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, pow as cpow, isfinite

from scipy.integrate._ivp import dop853_coefficients as _dop

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double cabs(double complex)

cnp.import_array()

cdef int N_STAGES = 12
cdef double[:, ::1] _A = np.ascontiguousarray(_dop.A[:12, :12], dtype=np.float64)
cdef double[::1] _B = np.ascontiguousarray(_dop.B, dtype=np.float64)
cdef double[::1] _C = np.ascontiguousarray(_dop.C[:12], dtype=np.float64)
cdef double[::1] _E3 = np.ascontiguousarray(_dop.E3, dtype=np.float64)
cdef double[::1] _E5 = np.ascontiguousarray(_dop.E5, dtype=np.float64)

cdef enum:
    STATUS_OK = 0
    STATUS_COLLAPSE = 1
    STATUS_MAX_STEPS = 2


def mul2(const double complex[:, :] a, const double complex[:, :] b, int order):
    """Truncated product of two triangular coefficient arrays."""
    cdef Py_ssize_t na = a.shape[0], ma = a.shape[1]
    cdef Py_ssize_t nb = b.shape[0], mb = b.shape[1]
    out_arr = np.zeros((order + 1, order + 1), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef Py_ssize_t i1, j1, i2, j2
    cdef double complex c
    for i1 in range(min(na, order + 1)):
        for j1 in range(min(ma, order + 1 - i1)):
            c = a[i1, j1]
            if c == 0:
                continue
            for i2 in range(min(nb, order + 1 - i1 - j1)):
                for j2 in range(min(mb, order + 1 - i1 - j1 - i2)):
                    out[i1 + i2, j1 + j2] += c * b[i2, j2]
    return out_arr


cdef inline double complex _peval(const double complex[:, ::1] c, double complex z,
                                  double complex w) nogil:
    cdef Py_ssize_t i, j
    cdef double complex result = 0, row
    for i in range(c.shape[0] - 1, -1, -1):
        row = 0
        for j in range(c.shape[1] - 1, -1, -1):
            row = row * w + c[i, j]
        result = result * z + row
    return result


def polyval2(c, z, w):
    """Evaluate sum c[i, j] z**i w**j at matching arrays of points."""
    cdef const double complex[:, ::1] cc = np.ascontiguousarray(c, dtype=np.complex128)
    zb, wb = np.broadcast_arrays(np.asarray(z, dtype=np.complex128),
                                 np.asarray(w, dtype=np.complex128))
    shape = zb.shape
    cdef double complex[::1] zz = np.ascontiguousarray(zb.ravel())
    cdef double complex[::1] ww = np.ascontiguousarray(wb.ravel())
    out_arr = np.empty(zz.shape[0], dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef Py_ssize_t k
    for k in range(zz.shape[0]):
        out[k] = _peval(cc, zz[k], ww[k])
    return out_arr.reshape(shape)


cdef inline int _rhs(const double complex[:, ::1] P, const double complex[:, ::1] Q,
                     int kind, double complex alpha, double complex beta,
                     double complex gamma, double complex delta, double complex zeta0,
                     double theta, double complex z, double complex* out) nogil:
    cdef double complex zeta, den, w, dw, q
    if kind == 0:
        zeta = zeta0 * cexp(1j * theta)
        den = gamma * zeta + delta
        w = (alpha * zeta + beta) / den
        dw = (alpha * delta - beta * gamma) / (den * den) * 1j * zeta
    else:
        w = alpha + theta * beta
        dw = beta
    q = _peval(Q, z, w)
    if cabs(q) < 1e-300:
        return 1
    out[0] = -_peval(P, z, w) / q * dw
    if not (isfinite(out[0].real) and isfinite(out[0].imag)):
        return 1
    return 0


def integrate_leaves(P, Q, int kind, alpha, beta, gamma, delta, zeta0,
                     double theta0, double theta1, z0, double rtol, double atol,
                     double tube, int max_steps):
    """Integrate dz/dtheta = -P(z, w)/Q(z, w) * dw/dtheta for every sample.

    Path parameters are per-sample arrays. ``kind == 0``: w is the Moebius
    image of zeta0 * exp(i theta); ``kind == 1``: w = alpha + theta * beta.
    Returns ``(z_end, err_est, status)``.
    """
    cdef const double complex[:, ::1] Pc = np.ascontiguousarray(P, dtype=np.complex128)
    cdef const double complex[:, ::1] Qc = np.ascontiguousarray(Q, dtype=np.complex128)
    z0a = np.ascontiguousarray(z0, dtype=np.complex128).ravel()
    cdef Py_ssize_t n = z0a.shape[0]
    cdef const double complex[::1] zin = z0a
    cdef double complex[::1] al = np.broadcast_to(np.asarray(alpha, dtype=np.complex128), (n,)).copy()
    cdef double complex[::1] be = np.broadcast_to(np.asarray(beta, dtype=np.complex128), (n,)).copy()
    cdef double complex[::1] ga = np.broadcast_to(np.asarray(gamma, dtype=np.complex128), (n,)).copy()
    cdef double complex[::1] de = np.broadcast_to(np.asarray(delta, dtype=np.complex128), (n,)).copy()
    cdef double complex[::1] ze = np.broadcast_to(np.asarray(zeta0, dtype=np.complex128), (n,)).copy()
    z_end_arr = np.empty(n, dtype=np.complex128)
    err_arr = np.zeros(n, dtype=np.float64)
    status_arr = np.zeros(n, dtype=np.int64)
    cdef double complex[::1] z_end = z_end_arr
    cdef double[::1] err_out = err_arr
    cdef cnp.int64_t[::1] status = status_arr

    cdef double complex K[13]
    cdef double complex z, znew, zs, err5, err3, f0
    cdef double t, h, span = theta1 - theta0, direction, hmin, e5, e3, err, scale, factor
    cdef Py_ssize_t k, s, j
    cdef int steps, failed
    if span == 0:
        return z0a.copy(), err_arr, status_arr
    direction = 1.0 if span > 0 else -1.0
    hmin = 1e-13 * fabs(span)

    with nogil:
        for k in range(n):
            z = zin[k]
            t = theta0
            h = span / 16.0
            steps = 0
            if _rhs(Pc, Qc, kind, al[k], be[k], ga[k], de[k], ze[k], t, z, &f0):
                status[k] = STATUS_COLLAPSE
                z_end[k] = z
                continue
            while (theta1 - t) * direction > 0:
                if (t + h - theta1) * direction > 0:
                    h = theta1 - t
                K[0] = f0
                failed = 0
                for s in range(1, N_STAGES):
                    zs = z
                    for j in range(s):
                        zs = zs + h * _A[s, j] * K[j]
                    if _rhs(Pc, Qc, kind, al[k], be[k], ga[k], de[k], ze[k],
                            t + _C[s] * h, zs, &K[s]):
                        failed = 1
                        break
                if not failed:
                    znew = z
                    for j in range(N_STAGES):
                        znew = znew + h * _B[j] * K[j]
                    if cabs(znew) > tube or _rhs(Pc, Qc, kind, al[k], be[k], ga[k],
                                                 de[k], ze[k], t + h, znew, &K[12]):
                        failed = 1
                if failed:
                    h *= 0.25
                    if fabs(h) < hmin:
                        status[k] = STATUS_COLLAPSE
                        break
                    continue
                err5 = 0
                err3 = 0
                for j in range(N_STAGES + 1):
                    err5 = err5 + _E5[j] * K[j]
                    err3 = err3 + _E3[j] * K[j]
                scale = atol + rtol * max(cabs(z), cabs(znew))
                e5 = cabs(err5) / scale
                e3 = cabs(err3) / scale
                if e5 == 0 and e3 == 0:
                    err = 0
                else:
                    err = fabs(h) * e5 * e5 / sqrt(e5 * e5 + 0.01 * e3 * e3)
                steps += 1
                if steps > max_steps:
                    status[k] = STATUS_MAX_STEPS
                    break
                if err <= 1.0:
                    t = t + h
                    z = znew
                    f0 = K[12]
                    err_out[k] += err * scale
                    factor = 10.0 if err == 0 else min(10.0, 0.9 * cpow(err, -0.125))
                    h *= factor
                else:
                    h *= max(0.2, 0.9 * cpow(err, -0.125))
                    if fabs(h) < hmin:
                        status[k] = STATUS_COLLAPSE
                        break
            z_end[k] = z
    return z_end_arr, err_arr, status_arr
