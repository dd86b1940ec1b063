# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled SGD inner loop.

Same contract as ``_sgd_numpy.run_steps`` but with the activation selected
by an integer code (0 = exp, 1 = identity).  The per-step linear algebra
and norm updates run as C loops; the exponential is evaluated through
NumPy's SIMD kernel on the length-r buffer, which beats scalar libm calls
once r is more than a few dozen.
"""

import numpy as np

from libc.math cimport sqrt

BACKEND = "compiled"

ACT_EXP = 0
ACT_IDENTITY = 1


def run_steps(double[:, ::1] W, double[::1] U, double[:, ::1] W0,
              double[:, ::1] X, double[::1] Y, double eta, int act_code,
              double[::1] loss, double[::1] drift, double[::1] unorm,
              double[::1] wnorm, Py_ssize_t start, Py_ssize_t count):
    cdef Py_ssize_t r = W.shape[0]
    cdef Py_ssize_t d = W.shape[1]
    cdef Py_ssize_t t, i, j
    cdef double acc, n_val, margin, y, coef
    cdef double dr, un, wn, diff
    z_buf = np.empty(r, dtype=np.float64)
    s_buf = np.empty(r, dtype=np.float64)
    cdef double[::1] zv = z_buf
    cdef double[::1] sv = s_buf

    for t in range(start, start + count):
        y = Y[t]
        for i in range(r):
            acc = 0.0
            for j in range(d):
                acc += W[i, j] * X[t, j]
            zv[i] = acc
        if act_code == ACT_EXP:
            np.exp(z_buf, out=s_buf)
        else:
            s_buf[:] = z_buf
        n_val = 0.0
        for i in range(r):
            n_val += U[i] * sv[i]
        margin = 1.0 - y * n_val
        loss[t] = margin if margin > 0.0 else 0.0
        if margin >= 0.0:
            # sigma' = sigma for exp, 1 for identity; use pre-update U for dW
            for i in range(r):
                if act_code == ACT_EXP:
                    coef = eta * y * U[i] * sv[i]
                else:
                    coef = eta * y * U[i]
                for j in range(d):
                    W[i, j] += coef * X[t, j]
                U[i] += eta * y * sv[i]
        dr = 0.0
        wn = 0.0
        un = 0.0
        for i in range(r):
            un += U[i] * U[i]
            for j in range(d):
                diff = W[i, j] - W0[i, j]
                dr += diff * diff
                wn += W[i, j] * W[i, j]
        drift[t + 1] = sqrt(dr)
        unorm[t + 1] = sqrt(un)
        wnorm[t + 1] = sqrt(wn)
