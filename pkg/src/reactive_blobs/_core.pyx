# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stencil kernels; same contract as ``_fallback``."""

import numpy as np

cimport cython


cdef inline Py_ssize_t _wrap(Py_ssize_t i, Py_ssize_t n) noexcept nogil:
    if i < 0:
        return i + n
    if i >= n:
        return i - n
    return i


cdef inline double _nb3(const double[:, :, ::1] x, Py_ssize_t i, Py_ssize_t j,
                        Py_ssize_t k, bint periodic) noexcept nogil:
    cdef Py_ssize_t n0 = x.shape[0], n1 = x.shape[1], n2 = x.shape[2]
    cdef double s = 0.0
    if periodic:
        s = (x[_wrap(i - 1, n0), j, k] + x[_wrap(i + 1, n0), j, k]
             + x[i, _wrap(j - 1, n1), k] + x[i, _wrap(j + 1, n1), k]
             + x[i, j, _wrap(k - 1, n2)] + x[i, j, _wrap(k + 1, n2)])
    else:
        if i > 0:
            s += x[i - 1, j, k]
        if i < n0 - 1:
            s += x[i + 1, j, k]
        if j > 0:
            s += x[i, j - 1, k]
        if j < n1 - 1:
            s += x[i, j + 1, k]
        if k > 0:
            s += x[i, j, k - 1]
        if k < n2 - 1:
            s += x[i, j, k + 1]
    return s


cdef inline double _nb2(const double[:, ::1] x, Py_ssize_t i, Py_ssize_t j,
                        bint periodic) noexcept nogil:
    cdef Py_ssize_t n0 = x.shape[0], n1 = x.shape[1]
    cdef double s = 0.0
    if periodic:
        s = (x[_wrap(i - 1, n0), j] + x[_wrap(i + 1, n0), j]
             + x[i, _wrap(j - 1, n1)] + x[i, _wrap(j + 1, n1)])
    else:
        if i > 0:
            s += x[i - 1, j]
        if i < n0 - 1:
            s += x[i + 1, j]
        if j > 0:
            s += x[i, j - 1]
        if j < n1 - 1:
            s += x[i, j + 1]
    return s


cdef void _color3(double[:, :, ::1] x, const double[:, :, ::1] g,
                  const double[:, :, ::1] diag, double coef, bint periodic,
                  int color) noexcept nogil:
    cdef Py_ssize_t i, j, k, k0
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            k0 = (i + j + color) & 1
            for k in range(k0, x.shape[2], 2):
                x[i, j, k] = (g[i, j, k] + coef * _nb3(x, i, j, k, periodic)) / diag[i, j, k]


cdef void _color2(double[:, ::1] x, const double[:, ::1] g, const double[:, ::1] diag,
                  double coef, bint periodic, int color) noexcept nogil:
    cdef Py_ssize_t i, j, j0
    for i in range(x.shape[0]):
        j0 = (i + color) & 1
        for j in range(j0, x.shape[1], 2):
            x[i, j] = (g[i, j] + coef * _nb2(x, i, j, periodic)) / diag[i, j]


def _sweep(x, g, diag, double coef, bint periodic, int sweeps, int first):
    cdef int s
    cdef double[:, :, ::1] x3
    cdef const double[:, :, ::1] g3, d3
    cdef double[:, ::1] x2
    cdef const double[:, ::1] g2, d2
    if x.ndim == 3:
        x3 = x
        g3 = g
        d3 = diag
        with nogil:
            for s in range(sweeps):
                _color3(x3, g3, d3, coef, periodic, first)
                _color3(x3, g3, d3, coef, periodic, 1 - first)
    elif x.ndim == 2:
        x2 = x
        g2 = g
        d2 = diag
        with nogil:
            for s in range(sweeps):
                _color2(x2, g2, d2, coef, periodic, first)
                _color2(x2, g2, d2, coef, periodic, 1 - first)
    else:
        raise ValueError("only 2-D and 3-D arrays are supported")
    return x


def rbgs(x, g, diag, double coef, bint periodic, int sweeps):
    return _sweep(x, g, diag, coef, periodic, sweeps, 0)


def rbgs_reverse(x, g, diag, double coef, bint periodic, int sweeps):
    return _sweep(x, g, diag, coef, periodic, sweeps, 1)


def apply_operator(x, diag, double coef, bint periodic):
    cdef Py_ssize_t i, j, k
    out = np.empty(x.shape)
    cdef const double[:, :, ::1] x3, d3
    cdef double[:, :, ::1] o3
    cdef const double[:, ::1] x2, d2
    cdef double[:, ::1] o2
    if x.ndim == 3:
        x3 = x
        d3 = diag
        o3 = out
        with nogil:
            for i in range(x3.shape[0]):
                for j in range(x3.shape[1]):
                    for k in range(x3.shape[2]):
                        o3[i, j, k] = d3[i, j, k] * x3[i, j, k] - coef * _nb3(x3, i, j, k, periodic)
    elif x.ndim == 2:
        x2 = x
        d2 = diag
        o2 = out
        with nogil:
            for i in range(x2.shape[0]):
                for j in range(x2.shape[1]):
                    o2[i, j] = d2[i, j] * x2[i, j] - coef * _nb2(x2, i, j, periodic)
    else:
        raise ValueError("only 2-D and 3-D arrays are supported")
    return out


def residual(x, g, diag, double coef, bint periodic):
    out = apply_operator(x, diag, coef, periodic)
    np.subtract(g, out, out=out)
    return out


def neighbor_sum(x, bint periodic):
    cdef Py_ssize_t i, j, k
    out = np.empty(x.shape)
    cdef const double[:, :, ::1] x3
    cdef double[:, :, ::1] o3
    cdef const double[:, ::1] x2
    cdef double[:, ::1] o2
    if x.ndim == 3:
        x3 = x
        o3 = out
        with nogil:
            for i in range(x3.shape[0]):
                for j in range(x3.shape[1]):
                    for k in range(x3.shape[2]):
                        o3[i, j, k] = _nb3(x3, i, j, k, periodic)
    elif x.ndim == 2:
        x2 = x
        o2 = out
        with nogil:
            for i in range(x2.shape[0]):
                for j in range(x2.shape[1]):
                    o2[i, j] = _nb2(x2, i, j, periodic)
    else:
        raise ValueError("only 2-D and 3-D arrays are supported")
    return out
