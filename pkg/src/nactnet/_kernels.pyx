# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled N-activation kernels over (batch, channel) arrays."""

import numpy as np


def nact_forward(const double[:, ::1] x, const double[::1] tmin, const double[::1] tmax):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], i, j
    cdef double v
    y_arr = np.empty((n, c), dtype=np.float64)
    b_arr = np.empty((n, c), dtype=np.int8)
    cdef double[:, ::1] y = y_arr
    cdef signed char[:, ::1] b = b_arr
    with nogil:
        for i in range(n):
            for j in range(c):
                v = x[i, j]
                if v >= tmax[j]:
                    y[i, j] = v - 2.0 * tmax[j]
                    b[i, j] = 2
                elif v >= tmin[j]:
                    y[i, j] = -v
                    b[i, j] = 1
                else:
                    y[i, j] = v - 2.0 * tmin[j]
                    b[i, j] = 0
    return y_arr, b_arr


def nact_backward(const double[:, ::1] up, const signed char[:, ::1] branch):
    cdef Py_ssize_t n = up.shape[0], c = up.shape[1], i, j
    cdef double u
    dx_arr = np.empty((n, c), dtype=np.float64)
    dmin_arr = np.zeros(c, dtype=np.float64)
    dmax_arr = np.zeros(c, dtype=np.float64)
    cdef double[:, ::1] dx = dx_arr
    cdef double[::1] dmin = dmin_arr
    cdef double[::1] dmax = dmax_arr
    with nogil:
        for i in range(n):
            for j in range(c):
                u = up[i, j]
                if branch[i, j] == 1:
                    dx[i, j] = -u
                else:
                    dx[i, j] = u
                    if branch[i, j] == 0:
                        dmin[j] -= 2.0 * u
                    else:
                        dmax[j] -= 2.0 * u
    return dx_arr, dmin_arr, dmax_arr
