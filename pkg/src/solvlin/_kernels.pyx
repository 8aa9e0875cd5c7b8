# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: normal-form flow catalog and piecewise RK4.

Same contracts as ``_kernels_py``.
"""

import numpy as np
from libc.math cimport exp, expm1, fabs, ceil

cdef double SING_TOL = 1e-10


cdef inline double _exprel(double z, double t) nogil:
    if z == 0.0:
        return t
    return expm1(z * t) / z


cdef inline int _flow(int tag, double a, double b, double alpha, double beta,
                      double x, double y, double u, double t,
                      double* xo, double* yo) noexcept nogil:
    cdef double z, delta, ebt, tol
    if tag == 1:
        xo[0] = x
        yo[0] = y + (a * (x - 1.0) + u * x * beta) * t
    elif tag == 2:
        xo[0] = x
        yo[0] = exp(b * t) * y + u * x * beta * _exprel(b, t)
    elif tag == 3:
        xo[0] = exp(u * alpha * t) * x
        yo[0] = exp(b * t) * y
    elif tag == 4:
        z = u * alpha
        if fabs(z) <= SING_TOL:
            xo[0] = x
            yo[0] = y + a * (x - 1.0) * t
        else:
            xo[0] = exp(z * t) * x
            yo[0] = y + a * (x * _exprel(z, t) - t)
    elif tag == 5:
        delta = u * alpha - b
        ebt = exp(b * t)
        tol = SING_TOL * (fabs(b) if fabs(b) > 1.0 else 1.0)
        if fabs(delta) <= tol:
            xo[0] = ebt * x
            yo[0] = ebt * (y + t * (b / alpha) * beta * x)
        else:
            xo[0] = exp(u * alpha * t) * x
            yo[0] = ebt * y + u * beta * x * ebt * _exprel(delta, t)
    else:
        return -1
    return 0


def nf_flow(int tag, double a, double b, double alpha, double beta,
            double x, double y, double u, double t):
    cdef double xo, yo
    if _flow(tag, a, b, alpha, beta, x, y, u, t, &xo, &yo) != 0:
        raise ValueError(f"unknown normal-form tag {tag!r}")
    return xo, yo


def flow_batch(int tag, double a, double b, double alpha, double beta,
               x0, y0, dts, us, double tsign=1.0):
    cdef double[:, ::1] d = np.ascontiguousarray(dts, dtype=np.float64)
    cdef double[:, ::1] uu = np.ascontiguousarray(us, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0], k = d.shape[1], i, j
    xs_arr = np.empty((n, k + 1))
    ys_arr = np.empty((n, k + 1))
    cdef double[:, ::1] xs = xs_arr
    cdef double[:, ::1] ys = ys_arr
    cdef double[::1] xi = np.array(np.broadcast_to(x0, (n,)), dtype=np.float64)
    cdef double[::1] yi = np.array(np.broadcast_to(y0, (n,)), dtype=np.float64)
    if tag < 1 or tag > 5:
        raise ValueError(f"unknown normal-form tag {tag!r}")
    with nogil:
        for i in range(n):
            xs[i, 0] = xi[i]
            ys[i, 0] = yi[i]
            for j in range(k):
                _flow(tag, a, b, alpha, beta, xs[i, j], ys[i, j], uu[i, j],
                      tsign * d[i, j], &xs[i, j + 1], &ys[i, j + 1])
    return xs_arr, ys_arr


def rk4_piecewise(double a, double b, double alpha, double beta,
                  double x0, double y0, dts, us, double h):
    if not h > 0.0:
        raise ValueError("step size h must be positive")
    cdef double[::1] d = np.ascontiguousarray(dts, dtype=np.float64)
    cdef double[::1] uu = np.ascontiguousarray(us, dtype=np.float64)
    cdef Py_ssize_t nseg = d.shape[0], j, q, i
    counts_arr = np.empty(nseg, dtype=np.int64)
    cdef long long[::1] counts = counts_arr
    cdef long long m = 1, c
    for j in range(nseg):
        c = <long long> ceil(d[j] / h - 1e-9)
        if c < 1:
            c = 1
        counts[j] = c
        m += c
    ts_arr = np.empty(m)
    xs_arr = np.empty(m)
    ys_arr = np.empty(m)
    ul_arr = np.empty(m)
    cdef double[::1] ts = ts_arr
    cdef double[::1] xs = xs_arr
    cdef double[::1] ys = ys_arr
    cdef double[::1] ul = ul_arr
    cdef double t = 0.0, x = x0, y = y0, s, u, ua, ub
    cdef double k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y, xm, ym
    cdef bint bad = False
    ts[0] = t
    xs[0] = x
    ys[0] = y
    ul[0] = uu[0] if nseg > 0 else 0.0
    i = 1
    with nogil:
        for j in range(nseg):
            u = uu[j]
            s = d[j] / counts[j]
            ua = u * alpha
            ub = u * beta
            for q in range(counts[j]):
                k1x = ua * x
                k1y = a * (x - 1.0) + b * y + ub * x
                xm = x + 0.5 * s * k1x
                ym = y + 0.5 * s * k1y
                k2x = ua * xm
                k2y = a * (xm - 1.0) + b * ym + ub * xm
                xm = x + 0.5 * s * k2x
                ym = y + 0.5 * s * k2y
                k3x = ua * xm
                k3y = a * (xm - 1.0) + b * ym + ub * xm
                xm = x + s * k3x
                ym = y + s * k3y
                k4x = ua * xm
                k4y = a * (xm - 1.0) + b * ym + ub * xm
                x = x + s / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                y = y + s / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
                t = t + s
                if not x > 0.0:
                    bad = True
                    break
                ts[i] = t
                xs[i] = x
                ys[i] = y
                ul[i] = u
                i += 1
            if bad:
                break
    if bad:
        raise FloatingPointError(
            f"RK4 left the half-plane (x={x!r} at t={t!r}); reduce the step size"
        )
    return ts_arr, xs_arr, ys_arr, ul_arr
