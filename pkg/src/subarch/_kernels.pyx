# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for dense/activation chains.

Parameters live in one flat float64 buffer in layer order (W row-major, then
b).  Layer codes: 0 dense, 1 sigmoid, 2 tanh, 3 relu.  Loss is quadratic.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh, isfinite

cnp.import_array()


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double ez
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    ez = exp(z)
    return ez / (1.0 + ez)


cdef void _forward(double[::1] params, const int[::1] kinds, const int[::1] in_dims,
                   const int[::1] out_dims, const long[::1] w_off, const long[::1] b_off,
                   const long[::1] act_off, double[::1] act) noexcept nogil:
    cdef Py_ssize_t l, i, j, nl = kinds.shape[0]
    cdef long src, dst, w, b
    cdef int nin, nout
    cdef double acc
    for l in range(nl):
        src = act_off[l]
        dst = act_off[l + 1]
        nin = in_dims[l]
        nout = out_dims[l]
        if kinds[l] == 0:
            w = w_off[l]
            b = b_off[l]
            for j in range(nout):
                acc = 0.0
                for i in range(nin):
                    acc = acc + params[w + j * nin + i] * act[src + i]
                if b >= 0:
                    acc = acc + params[b + j]
                act[dst + j] = acc
        elif kinds[l] == 1:
            for i in range(nin):
                act[dst + i] = _sigmoid(act[src + i])
        elif kinds[l] == 2:
            for i in range(nin):
                act[dst + i] = tanh(act[src + i])
        else:
            for i in range(nin):
                act[dst + i] = act[src + i] if act[src + i] > 0 else 0.0


def forward_dense_chain(double[::1] params, const int[::1] kinds, const int[::1] in_dims,
                        const int[::1] out_dims, const long[::1] w_off, const long[::1] b_off,
                        const double[:, ::1] X):
    """Network output for every row of ``X``."""
    cdef Py_ssize_t nl = kinds.shape[0], m = X.shape[0], k, i
    cdef cnp.ndarray[long, ndim=1] offs = np.zeros(nl + 2, dtype=np.int_)
    for k in range(nl):
        offs[k + 1] = offs[k] + in_dims[k]
    offs[nl + 1] = offs[nl] + out_dims[nl - 1]
    cdef long[::1] act_off = offs
    cdef double[::1] act = np.zeros(offs[nl + 1], dtype=np.float64)
    cdef double[::1] out = np.zeros(m, dtype=np.float64)
    cdef int nin = in_dims[0]
    with nogil:
        for k in range(m):
            for i in range(nin):
                act[i] = X[k, i]
            _forward(params, kinds, in_dims, out_dims, w_off, b_off, act_off, act)
            out[k] = act[act_off[nl]]
    return np.asarray(out)


def sgd_dense_chain(double[::1] params, const int[::1] kinds, const int[::1] in_dims,
                    const int[::1] out_dims, const long[::1] w_off, const long[::1] b_off,
                    const double[:, ::1] X, const double[::1] Y, const long[::1] order,
                    double eta, double[::1] step_loss):
    """Single-example SGD over ``order``; updates ``params`` in place.

    Returns the number of completed steps; fewer than ``len(order)`` means a
    non-finite loss was met and training stopped.
    """
    cdef Py_ssize_t nl = kinds.shape[0], steps = order.shape[0]
    cdef Py_ssize_t s, l, i, j, k, maxw = 0
    cdef long src, dst, w, b
    cdef int nin, nout
    cdef double yhat, diff, g, d
    cdef cnp.ndarray[long, ndim=1] offs = np.zeros(nl + 2, dtype=np.int_)
    for l in range(nl):
        offs[l + 1] = offs[l] + in_dims[l]
        maxw = max(maxw, in_dims[l], out_dims[l])
    offs[nl + 1] = offs[nl] + out_dims[nl - 1]
    cdef long[::1] act_off = offs
    cdef double[::1] act = np.zeros(offs[nl + 1], dtype=np.float64)
    cdef double[::1] delta = np.zeros(maxw, dtype=np.float64)
    cdef double[::1] delta_in = np.zeros(maxw, dtype=np.float64)
    cdef Py_ssize_t done = 0
    with nogil:
        for s in range(steps):
            k = order[s]
            for i in range(in_dims[0]):
                act[i] = X[k, i]
            _forward(params, kinds, in_dims, out_dims, w_off, b_off, act_off, act)
            yhat = act[act_off[nl]]
            diff = yhat - Y[k]
            step_loss[s] = diff * diff
            if not isfinite(step_loss[s]):
                break
            delta[0] = 2.0 * diff
            for l in range(nl - 1, -1, -1):
                src = act_off[l]
                dst = act_off[l + 1]
                nin = in_dims[l]
                nout = out_dims[l]
                if kinds[l] == 0:
                    w = w_off[l]
                    b = b_off[l]
                    # input deltas use the pre-update weights
                    for i in range(nin):
                        g = 0.0
                        for j in range(nout):
                            g = g + params[w + j * nin + i] * delta[j]
                        delta_in[i] = g
                    for j in range(nout):
                        d = eta * delta[j]
                        for i in range(nin):
                            params[w + j * nin + i] = params[w + j * nin + i] - d * act[src + i]
                        if b >= 0:
                            params[b + j] = params[b + j] - d
                elif kinds[l] == 1:
                    for i in range(nin):
                        delta_in[i] = delta[i] * act[dst + i] * (1.0 - act[dst + i])
                elif kinds[l] == 2:
                    for i in range(nin):
                        delta_in[i] = delta[i] * (1.0 - act[dst + i] * act[dst + i])
                else:
                    for i in range(nin):
                        delta_in[i] = delta[i] if act[src + i] > 0 else 0.0
                for i in range(nin):
                    delta[i] = delta_in[i]
            done = s + 1
    return done
