# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sequence kernels: the per-timestep recurrence in C.

Same contract as the reference module; recurrent matrix products go through
BLAS dgemm and the gate arithmetic runs in plain C loops.
"""

import numpy as np

from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm


cdef inline double _sigmoid(double x) nogil:
    return 1.0 / (1.0 + exp(-x))


def forward(double[:, :, ::1] x_proj, double[:, ::1] w_hh):
    cdef Py_ssize_t steps = x_proj.shape[0]
    cdef Py_ssize_t batch = x_proj.shape[1]
    cdef Py_ssize_t width = x_proj.shape[2]
    cdef Py_ssize_t hidden = width // 4

    gates_arr = np.array(x_proj, dtype=np.float64, copy=True)
    h_arr = np.zeros((steps, batch, hidden))
    c_arr = np.zeros((steps, batch, hidden))
    tc_arr = np.zeros((steps, batch, hidden))

    cdef double[:, :, ::1] gates = gates_arr
    cdef double[:, :, ::1] h = h_arr
    cdef double[:, :, ::1] c = c_arr
    cdef double[:, :, ::1] tc = tc_arr

    cdef char trans_t = b'T', trans_n = b'N'
    cdef int m = <int>width, n = <int>batch, k = <int>hidden
    cdef int lda = <int>hidden, ldb = <int>hidden, ldc = <int>width
    cdef double one = 1.0
    cdef Py_ssize_t t, b, j
    cdef double gi, gf, gg, go, cp, cc

    with nogil:
        for t in range(steps):
            if t > 0:
                # gates[t] += h[t-1] @ w_hh.T via the column-major transpose trick
                dgemm(&trans_t, &trans_n, &m, &n, &k, &one,
                      &w_hh[0, 0], &lda, &h[t - 1, 0, 0], &ldb,
                      &one, &gates[t, 0, 0], &ldc)
            for b in range(batch):
                for j in range(hidden):
                    gi = _sigmoid(gates[t, b, j])
                    gf = _sigmoid(gates[t, b, hidden + j])
                    gg = tanh(gates[t, b, 2 * hidden + j])
                    go = _sigmoid(gates[t, b, 3 * hidden + j])
                    cp = c[t - 1, b, j] if t > 0 else 0.0
                    cc = gf * cp + gi * gg
                    gates[t, b, j] = gi
                    gates[t, b, hidden + j] = gf
                    gates[t, b, 2 * hidden + j] = gg
                    gates[t, b, 3 * hidden + j] = go
                    c[t, b, j] = cc
                    tc[t, b, j] = tanh(cc)
                    h[t, b, j] = go * tc[t, b, j]
    return h_arr, c_arr, tc_arr, gates_arr


def backward(double[:, ::1] w_hh,
             double[:, :, ::1] gates,
             double[:, :, ::1] c,
             double[:, :, ::1] tanh_c,
             double[:, :, ::1] grad_h_out):
    cdef Py_ssize_t steps = gates.shape[0]
    cdef Py_ssize_t batch = gates.shape[1]
    cdef Py_ssize_t width = gates.shape[2]
    cdef Py_ssize_t hidden = width // 4

    grad_pre_arr = np.zeros((steps, batch, width))
    dh_arr = np.zeros((batch, hidden))
    dc_arr = np.zeros((batch, hidden))

    cdef double[:, :, ::1] grad_pre = grad_pre_arr
    cdef double[:, ::1] dh = dh_arr
    cdef double[:, ::1] dc = dc_arr

    cdef char trans_n = b'N'
    cdef int m = <int>hidden, n = <int>batch, k = <int>width
    cdef int lda = <int>hidden, ldb = <int>width, ldc = <int>hidden
    cdef double one = 1.0, zero = 0.0
    cdef Py_ssize_t t, b, j
    cdef double gi, gf, gg, go, tcv, dht, dct, cp

    with nogil:
        for t in range(steps - 1, -1, -1):
            for b in range(batch):
                for j in range(hidden):
                    gi = gates[t, b, j]
                    gf = gates[t, b, hidden + j]
                    gg = gates[t, b, 2 * hidden + j]
                    go = gates[t, b, 3 * hidden + j]
                    tcv = tanh_c[t, b, j]
                    dht = grad_h_out[t, b, j] + dh[b, j]
                    dct = dc[b, j] + dht * go * (1.0 - tcv * tcv)
                    cp = c[t - 1, b, j] if t > 0 else 0.0
                    grad_pre[t, b, j] = dct * gg * gi * (1.0 - gi)
                    grad_pre[t, b, hidden + j] = dct * cp * gf * (1.0 - gf)
                    grad_pre[t, b, 2 * hidden + j] = dct * gi * (1.0 - gg * gg)
                    grad_pre[t, b, 3 * hidden + j] = dht * tcv * go * (1.0 - go)
                    dc[b, j] = dct * gf
            # dh = grad_pre[t] @ w_hh
            dgemm(&trans_n, &trans_n, &m, &n, &k, &one,
                  &w_hh[0, 0], &lda, &grad_pre[t, 0, 0], &ldb,
                  &zero, &dh[0, 0], &ldc)
    return grad_pre_arr
