"""Compiled fixed-step Dormand-Prince (order 5) integration of the spin-orbit field.

The state carries the 2x2 variational matrix when ``jac`` is set.  The
kernels are written against generic scalar arithmetic so that the same
code runs on float64 and complex128 arrays (complex initial data is used
for Cauchy-integral Taylor extraction).
"""

import numpy as np
from numba import njit

# Dormand-Prince 5(4) tableau, fifth order weights.
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0


@njit(cache=True)
def _force(theta, t, ks, ls, ca, cb):
    """Return (d_theta f, d_theta^2 f) for f = sum a cos(k th + l t) + b sin(k th + l t)."""
    d1 = 0.0 * theta
    d2 = 0.0 * theta
    for j in range(ks.shape[0]):
        k = ks[j]
        arg = k * theta + ls[j] * t
        s = np.sin(arg)
        c = np.cos(arg)
        d1 += k * (cb[j] * c - ca[j] * s)
        d2 -= k * k * (ca[j] * c + cb[j] * s)
    return d1, d2


@njit(cache=True)
def _field(th, r, j00, j01, j10, j11, t, alpha, eta, drift, eps, ks, ls, ca, cb, jac):
    f1, f2 = _force(th, t, ks, ls, ca, cb)
    dth = alpha + r
    dr = -eta * r + drift - eps * f1
    if jac:
        m = -eps * f2
        return dth, dr, j10, j11, m * j00 - eta * j10, m * j01 - eta * j11
    return dth, dr, 0.0 * j00, 0.0 * j01, 0.0 * j10, 0.0 * j11


@njit(cache=True)
def flow(theta0, r0, alpha, eta, drift, eps, ks, ls, ca, cb, t0, t1, n_steps, jac, out, jout):
    """Integrate every initial point from t0 to t1 in ``n_steps`` equal steps.

    ``out`` receives (theta, r) with shape (n, 2); ``jout`` receives the
    flattened Jacobian (n, 4) when ``jac`` is true.  Returns -1 on success or
    the index of the first step where the state stopped being finite.
    """
    h = (t1 - t0) / n_steps
    bad = -1
    for p in range(theta0.shape[0]):
        y0 = theta0[p]
        y1 = r0[p]
        y2 = 1.0 + 0.0 * y0
        y3 = 0.0 * y0
        y4 = 0.0 * y0
        y5 = 1.0 + 0.0 * y0
        for n in range(n_steps):
            t = t0 + n * h
            k10, k11, k12, k13, k14, k15 = _field(y0, y1, y2, y3, y4, y5, t, alpha, eta, drift, eps,
                                                  ks, ls, ca, cb, jac)
            k20, k21, k22, k23, k24, k25 = _field(
                y0 + h * _A21 * k10, y1 + h * _A21 * k11, y2 + h * _A21 * k12,
                y3 + h * _A21 * k13, y4 + h * _A21 * k14, y5 + h * _A21 * k15,
                t + _C2 * h, alpha, eta, drift, eps, ks, ls, ca, cb, jac)
            k30, k31, k32, k33, k34, k35 = _field(
                y0 + h * (_A31 * k10 + _A32 * k20), y1 + h * (_A31 * k11 + _A32 * k21),
                y2 + h * (_A31 * k12 + _A32 * k22), y3 + h * (_A31 * k13 + _A32 * k23),
                y4 + h * (_A31 * k14 + _A32 * k24), y5 + h * (_A31 * k15 + _A32 * k25),
                t + _C3 * h, alpha, eta, drift, eps, ks, ls, ca, cb, jac)
            k40, k41, k42, k43, k44, k45 = _field(
                y0 + h * (_A41 * k10 + _A42 * k20 + _A43 * k30),
                y1 + h * (_A41 * k11 + _A42 * k21 + _A43 * k31),
                y2 + h * (_A41 * k12 + _A42 * k22 + _A43 * k32),
                y3 + h * (_A41 * k13 + _A42 * k23 + _A43 * k33),
                y4 + h * (_A41 * k14 + _A42 * k24 + _A43 * k34),
                y5 + h * (_A41 * k15 + _A42 * k25 + _A43 * k35),
                t + _C4 * h, alpha, eta, drift, eps, ks, ls, ca, cb, jac)
            k50, k51, k52, k53, k54, k55 = _field(
                y0 + h * (_A51 * k10 + _A52 * k20 + _A53 * k30 + _A54 * k40),
                y1 + h * (_A51 * k11 + _A52 * k21 + _A53 * k31 + _A54 * k41),
                y2 + h * (_A51 * k12 + _A52 * k22 + _A53 * k32 + _A54 * k42),
                y3 + h * (_A51 * k13 + _A52 * k23 + _A53 * k33 + _A54 * k43),
                y4 + h * (_A51 * k14 + _A52 * k24 + _A53 * k34 + _A54 * k44),
                y5 + h * (_A51 * k15 + _A52 * k25 + _A53 * k35 + _A54 * k45),
                t + _C5 * h, alpha, eta, drift, eps, ks, ls, ca, cb, jac)
            k60, k61, k62, k63, k64, k65 = _field(
                y0 + h * (_A61 * k10 + _A62 * k20 + _A63 * k30 + _A64 * k40 + _A65 * k50),
                y1 + h * (_A61 * k11 + _A62 * k21 + _A63 * k31 + _A64 * k41 + _A65 * k51),
                y2 + h * (_A61 * k12 + _A62 * k22 + _A63 * k32 + _A64 * k42 + _A65 * k52),
                y3 + h * (_A61 * k13 + _A62 * k23 + _A63 * k33 + _A64 * k43 + _A65 * k53),
                y4 + h * (_A61 * k14 + _A62 * k24 + _A63 * k34 + _A64 * k44 + _A65 * k54),
                y5 + h * (_A61 * k15 + _A62 * k25 + _A63 * k35 + _A64 * k45 + _A65 * k55),
                t + h, alpha, eta, drift, eps, ks, ls, ca, cb, jac)
            y0 = y0 + h * (_B1 * k10 + _B3 * k30 + _B4 * k40 + _B5 * k50 + _B6 * k60)
            y1 = y1 + h * (_B1 * k11 + _B3 * k31 + _B4 * k41 + _B5 * k51 + _B6 * k61)
            if jac:
                y2 = y2 + h * (_B1 * k12 + _B3 * k32 + _B4 * k42 + _B5 * k52 + _B6 * k62)
                y3 = y3 + h * (_B1 * k13 + _B3 * k33 + _B4 * k43 + _B5 * k53 + _B6 * k63)
                y4 = y4 + h * (_B1 * k14 + _B3 * k34 + _B4 * k44 + _B5 * k54 + _B6 * k64)
                y5 = y5 + h * (_B1 * k15 + _B3 * k35 + _B4 * k45 + _B5 * k55 + _B6 * k65)
            if not (np.isfinite(y0) and np.isfinite(y1)):
                if bad < 0 or n < bad:
                    bad = n
                break
        out[p, 0] = y0
        out[p, 1] = y1
        if jac:
            jout[p, 0] = y2
            jout[p, 1] = y3
            jout[p, 2] = y4
            jout[p, 3] = y5
    return bad


@njit(cache=True)
def _jet_field(y, t, alpha, eta, drift, eps, ks, ls, ca, cb, out, u, s, c):
    # y[0] is the theta series, y[1] the r series (coefficients of x^i)
    m = y.shape[1]
    for i in range(m):
        out[0, i] = y[1, i]
        out[1, i] = -eta * y[1, i]
    out[0, 0] += alpha
    out[1, 0] += drift
    if eps == 0.0:
        return
    for j in range(ks.shape[0]):
        k = ks[j]
        for i in range(m):
            u[i] = k * y[0, i]
        u[0] += ls[j] * t
        s[0] = np.sin(u[0])
        c[0] = np.cos(u[0])
        for n in range(1, m):
            acc_s = 0.0
            acc_c = 0.0
            for q in range(1, n + 1):
                acc_s += q * u[q] * c[n - q]
                acc_c += q * u[q] * s[n - q]
            s[n] = acc_s / n
            c[n] = -acc_c / n
        for i in range(m):
            out[1, i] -= eps * k * (cb[j] * c[i] - ca[j] * s[i])


@njit(cache=True)
def flow_jet(theta0, r0, degree, alpha, eta, drift, eps, ks, ls, ca, cb, t0, t1, n_steps, out):
    """Transport the degree-``degree`` Taylor jet in the initial r.

    Initial data is theta = theta0, r = r0 + x.  ``out`` has shape
    (n, 2, degree + 1) and receives the coefficients of x^i of the final
    (theta, r).  Returns -1 or the first non-finite step.
    """
    m = degree + 1
    h = (t1 - t0) / n_steps
    y = np.zeros((2, m))
    tmp = np.zeros((2, m))
    kk = np.zeros((6, 2, m))
    u = np.zeros(m)
    s = np.zeros(m)
    c = np.zeros(m)
    a = ((0.0, 0.0, 0.0, 0.0, 0.0),
         (_A21, 0.0, 0.0, 0.0, 0.0),
         (_A31, _A32, 0.0, 0.0, 0.0),
         (_A41, _A42, _A43, 0.0, 0.0),
         (_A51, _A52, _A53, _A54, 0.0),
         (_A61, _A62, _A63, _A64, _A65))
    cs = (0.0, _C2, _C3, _C4, _C5, 1.0)
    bw = (_B1, 0.0, _B3, _B4, _B5, _B6)
    bad = -1
    for p in range(theta0.shape[0]):
        y[:, :] = 0.0
        y[0, 0] = theta0[p]
        y[1, 0] = r0[p]
        if m > 1:
            y[1, 1] = 1.0
        for n in range(n_steps):
            t = t0 + n * h
            for st in range(6):
                for d in range(2):
                    for i in range(m):
                        acc = y[d, i]
                        for q in range(st):
                            acc += h * a[st][q] * kk[q, d, i]
                        tmp[d, i] = acc
                _jet_field(tmp, t + cs[st] * h, alpha, eta, drift, eps, ks, ls, ca, cb,
                           kk[st], u, s, c)
            for d in range(2):
                for i in range(m):
                    acc = 0.0
                    for st in range(6):
                        acc += bw[st] * kk[st, d, i]
                    y[d, i] += h * acc
            if not (np.isfinite(y[0, 0]) and np.isfinite(y[1, 0])):
                if bad < 0 or n < bad:
                    bad = n
                break
        for d in range(2):
            for i in range(m):
                out[p, d, i] = y[d, i]
    return bad
