# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: renewal forward substitution, slab thinning, and
intensity/compensator evaluation. Mirrors :mod:`nearcrit._pycore`."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

DEF KIND_EXP = 0
DEF KIND_GAMMA2 = 1


def volterra_forward(double[::1] w, double[::1] f):
    cdef Py_ssize_t N = f.shape[0]
    cdef Py_ssize_t n, j
    cdef double acc
    cdef double denom = 1.0 - w[0]
    out = np.zeros(N)
    cdef double[::1] x = out
    for n in range(N):
        acc = f[n]
        for j in range(n):
            acc += w[n - j] * x[j]
        x[n] = acc / denom
    return out


cdef inline double _peak(int kind, double mu, double beta, double s1, double s2) nogil:
    cdef double hstar
    if kind == KIND_EXP:
        return mu + s1
    if s1 <= 0.0:
        return mu + s2
    hstar = (beta * s1 - s2) / (beta * beta * s1)
    if hstar <= 0.0:
        return mu + s2
    return mu + beta * s1 * exp(-beta * hstar)


def sweep_slab(int kind, double[::1] t, double[::1] th, double mu, double a,
               double beta, double[::1] state, double ceiling):
    cdef Py_ssize_t n = t.shape[0]
    cdef Py_ssize_t p
    acc_arr = np.zeros(n, dtype=np.bool_)
    cdef cnp.npy_bool[::1] acc = acc_arr
    cdef double t0 = state[0]
    cdef double s1 = state[1]
    cdef double s2 = state[2]
    cdef double dt, e, lam, pk
    cdef double bound = _peak(kind, mu, beta, s1, s2)
    with nogil:
        for p in range(n):
            dt = t[p] - t0
            e = exp(-beta * dt)
            if kind == KIND_EXP:
                s1 = s1 * e
                lam = mu + s1
            else:
                s2 = e * (s2 + beta * beta * s1 * dt)
                s1 = s1 * e
                lam = mu + s2
            t0 = t[p]
            if th[p] <= lam:
                acc[p] = 1
                if kind == KIND_EXP:
                    s1 = s1 + a * beta
                else:
                    s1 = s1 + a
                pk = _peak(kind, mu, beta, s1, s2)
                if pk > bound:
                    bound = pk
                if bound > ceiling:
                    break
    state[0] = t0
    state[1] = s1
    state[2] = s2
    return acc_arr, bound


cdef inline void _advance(int kind, double mu, double beta, double h,
                          double* cum, double* s1, double* s2) nogil:
    cdef double e = exp(-beta * h)
    if kind == KIND_EXP:
        cum[0] += mu * h + s1[0] * (1.0 - e) / beta
        s1[0] = s1[0] * e
    else:
        cum[0] += mu * h + s2[0] * (1.0 - e) / beta + s1[0] * (1.0 - e * (1.0 + beta * h))
        s2[0] = e * (s2[0] + beta * beta * s1[0] * h)
        s1[0] = s1[0] * e


def intensity_at(int kind, double[::1] events, double mu, double a, double beta,
                 double[::1] query):
    cdef Py_ssize_t nq = query.shape[0]
    cdef Py_ssize_t ne = events.shape[0]
    left_arr = np.empty(nq)
    right_arr = np.empty(nq)
    comp_arr = np.empty(nq)
    cdef double[::1] left = left_arr
    cdef double[::1] right = right_arr
    cdef double[::1] comp = comp_arr
    cdef double t0 = 0.0, s1 = 0.0, s2 = 0.0, cum = 0.0
    cdef double tq, te, lam, jump
    cdef Py_ssize_t q, j, e_idx = 0
    with nogil:
        for q in range(nq):
            tq = query[q]
            while e_idx < ne and events[e_idx] < tq:
                te = events[e_idx]
                _advance(kind, mu, beta, te - t0, &cum, &s1, &s2)
                t0 = te
                if kind == KIND_EXP:
                    s1 = s1 + a * beta
                else:
                    s1 = s1 + a
                e_idx += 1
            _advance(kind, mu, beta, tq - t0, &cum, &s1, &s2)
            t0 = tq
            if kind == KIND_EXP:
                lam = mu + s1
            else:
                lam = mu + s2
            left[q] = lam
            jump = 0.0
            j = e_idx
            while j < ne and events[j] == tq:
                if kind == KIND_EXP:
                    jump += a * beta
                j += 1
            right[q] = lam + jump
            comp[q] = cum
    return left_arr, right_arr, comp_arr
