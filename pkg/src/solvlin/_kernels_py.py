"""Pure-Python kernels: normal-form flow catalog and piecewise RK4.

Mirrors ``_kernels.pyx`` function for function.  Normal forms are addressed by
their case number (1..5) and carry generic coefficients ``(a, b, alpha, beta)``.
"""

from __future__ import annotations

import math

import numpy as np

SING_TOL = 1e-10


def _exprel(z: float, t: float) -> float:
    # (e^{zt} - 1) / z, continuous at z = 0
    if z == 0.0:
        return t
    return math.expm1(z * t) / z


def nf_flow(tag, a, b, alpha, beta, x, y, u, t):
    """Constant-control flow of a normal-form system for time ``t``."""
    if tag == 1:
        return x, y + (a * (x - 1.0) + u * x * beta) * t
    if tag == 2:
        return x, math.exp(b * t) * y + u * x * beta * _exprel(b, t)
    if tag == 3:
        return math.exp(u * alpha * t) * x, math.exp(b * t) * y
    if tag == 4:
        z = u * alpha
        if abs(z) <= SING_TOL:
            return x, y + a * (x - 1.0) * t
        return math.exp(z * t) * x, y + a * (x * _exprel(z, t) - t)
    if tag == 5:
        delta = u * alpha - b
        ebt = math.exp(b * t)
        if abs(delta) <= SING_TOL * max(1.0, abs(b)):
            return ebt * x, ebt * (y + t * (b / alpha) * beta * x)
        # m_u (e^{u alpha t} - e^{bt}) x, written without cancellation
        return math.exp(u * alpha * t) * x, ebt * y + u * beta * x * ebt * _exprel(delta, t)
    raise ValueError(f"unknown normal-form tag {tag!r}")


def _exprel_vec(z, t):
    z, t = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(t, dtype=float))
    out = np.array(t, dtype=float, copy=True)
    nz = z != 0.0
    out[nz] = np.expm1(z[nz] * t[nz]) / z[nz]
    return out


def nf_flow_vec(tag, a, b, alpha, beta, x, y, u, t):
    """Vectorized :func:`nf_flow`; ``x, y, u, t`` broadcast together."""
    x, y, u, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, u, t)))
    if tag == 1:
        return x.copy(), y + (a * (x - 1.0) + u * x * beta) * t
    if tag == 2:
        return x.copy(), np.exp(b * t) * y + u * x * beta * _exprel_vec(b, t)
    if tag == 3:
        return np.exp(u * alpha * t) * x, np.exp(b * t) * y
    if tag == 4:
        z = u * alpha
        sing = np.abs(z) <= SING_TOL
        zr = np.where(sing, 0.0, z)
        xt = np.where(sing, x, np.exp(zr * t) * x)
        yt = np.where(sing, y + a * (x - 1.0) * t, y + a * (x * _exprel_vec(zr, t) - t))
        return xt, yt
    if tag == 5:
        delta = u * alpha - b
        ebt = np.exp(b * t)
        sing = np.abs(delta) <= SING_TOL * max(1.0, abs(b))
        dr = np.where(sing, 0.0, delta)
        xt = np.where(sing, ebt * x, np.exp(u * alpha * t) * x)
        yt = np.where(
            sing,
            ebt * (y + t * (b / alpha) * beta * x),
            ebt * y + u * beta * x * ebt * _exprel_vec(dr, t),
        )
        return xt, yt
    raise ValueError(f"unknown normal-form tag {tag!r}")


def flow_batch(tag, a, b, alpha, beta, x0, y0, dts, us, tsign=1.0):
    """Concatenate constant-control flows row by row.

    ``dts`` and ``us`` have shape (n, K); segment k of row i runs for
    ``tsign * dts[i, k]`` with level ``us[i, k]``.  Returns the states at all
    K + 1 segment boundaries, each of shape (n, K + 1).
    """
    dts = np.asarray(dts, dtype=float)
    us = np.asarray(us, dtype=float)
    n, k = dts.shape
    xs = np.empty((n, k + 1))
    ys = np.empty((n, k + 1))
    xs[:, 0] = x0
    ys[:, 0] = y0
    for j in range(k):
        xs[:, j + 1], ys[:, j + 1] = nf_flow_vec(
            tag, a, b, alpha, beta, xs[:, j], ys[:, j], us[:, j], tsign * dts[:, j]
        )
    return xs, ys


def rk4_piecewise(a, b, alpha, beta, x0, y0, dts, us, h):
    """Classical RK4 for the linear system, never stepping across a switch.

    Each segment of length ``dt`` is split into ``ceil(dt / h)`` equal steps.
    Returns arrays ``(t, x, y, u)`` with one entry per step boundary; ``u`` is
    the level in force on the step ending at that sample (first sample takes
    the first segment's level, or 0 for an empty control).
    """
    if not h > 0.0:
        raise ValueError("step size h must be positive")
    counts = [max(1, math.ceil(dt / h - 1e-9)) for dt in dts]
    m = sum(counts) + 1
    ts = np.empty(m)
    xs = np.empty(m)
    ys = np.empty(m)
    ul = np.empty(m)
    t, x, y = 0.0, float(x0), float(y0)
    ts[0], xs[0], ys[0] = t, x, y
    ul[0] = us[0] if len(us) else 0.0
    i = 1
    for dt, u, cnt in zip(dts, us, counts):
        s = dt / cnt
        ua, ub = u * alpha, u * beta
        for _ in range(cnt):
            k1x = ua * x
            k1y = a * (x - 1.0) + b * y + ub * x
            xm, ym = x + 0.5 * s * k1x, y + 0.5 * s * k1y
            k2x = ua * xm
            k2y = a * (xm - 1.0) + b * ym + ub * xm
            xm, ym = x + 0.5 * s * k2x, y + 0.5 * s * k2y
            k3x = ua * xm
            k3y = a * (xm - 1.0) + b * ym + ub * xm
            xm, ym = x + s * k3x, y + s * k3y
            k4x = ua * xm
            k4y = a * (xm - 1.0) + b * ym + ub * xm
            x += s / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            y += s / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
            t += s
            if not x > 0.0:
                raise FloatingPointError(
                    f"RK4 left the half-plane (x={x!r} at t={t!r}); reduce the step size"
                )
            ts[i], xs[i], ys[i], ul[i] = t, x, y, u
            i += 1
    return ts, xs, ys, ul
