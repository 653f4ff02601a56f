"""Pure-Python reference versions of the compiled hot loops.

Signatures and results match :mod:`nearcrit._core` exactly; these are used
when the extension is not built or when ``NEARCRIT_PURE=1``.
"""

from __future__ import annotations

import math

import numpy as np

KIND_EXP = 0
KIND_GAMMA2 = 1


def volterra_forward(w, f):
    """Solve ``x_n = f_n + sum_{j=1..n} w[n-j] x_j`` for ``n = 1..N``."""
    N = f.shape[0]
    x = np.zeros(N)
    denom = 1.0 - w[0]
    for n in range(N):
        acc = f[n]
        for j in range(n):
            acc += w[n - j] * x[j]
        x[n] = acc / denom
    return x


def sweep_slab(kind, t, th, mu, a, beta, state, ceiling):
    """Thin one time slab of field points against the running intensity.

    Parameters
    ----------
    kind : int
        ``KIND_EXP`` or ``KIND_GAMMA2``.
    t, th : ndarray
        Point times (sorted) and heights, original units.
    state : ndarray of length 3
        ``[time, s1, s2]``; for the exponential kernel ``s1`` is the excess
        intensity, for gamma2 ``s1 = A`` and ``s2 = B``. Updated in place.
    ceiling : float
        Height up to which points are present.

    Returns
    -------
    accepted : ndarray of bool
    bound : float
        Upper bound of the intensity over the processed span; when it
        exceeds ``ceiling`` the caller must add cells and rerun the slab.
    """
    n = t.shape[0]
    acc = np.zeros(n, dtype=bool)
    t0, s1, s2 = float(state[0]), float(state[1]), float(state[2])
    bound = _peak(kind, mu, beta, s1, s2)
    for p in range(n):
        dt = t[p] - t0
        e = math.exp(-beta * dt)
        if kind == KIND_EXP:
            s1 *= e
            lam = mu + s1
        else:
            s2 = e * (s2 + beta * beta * s1 * dt)
            s1 *= e
            lam = mu + s2
        t0 = t[p]
        if th[p] <= lam:
            acc[p] = True
            if kind == KIND_EXP:
                s1 += a * beta
            else:
                s1 += a
            pk = _peak(kind, mu, beta, s1, s2)
            if pk > bound:
                bound = pk
            if bound > ceiling:
                break
    state[0], state[1], state[2] = t0, s1, s2
    return acc, bound


def _peak(kind, mu, beta, s1, s2):
    if kind == KIND_EXP:
        return mu + s1
    if s1 <= 0.0:
        return mu + s2
    hstar = (beta * s1 - s2) / (beta * beta * s1)
    if hstar <= 0.0:
        return mu + s2
    return mu + beta * s1 * math.exp(-beta * hstar)


def intensity_at(kind, events, mu, a, beta, query):
    """Left intensity, right intensity and compensator at sorted query times."""
    nq = query.shape[0]
    left = np.empty(nq)
    right = np.empty(nq)
    comp = np.empty(nq)
    ne = events.shape[0]
    t0 = 0.0
    s1 = s2 = 0.0
    cum = 0.0
    e_idx = 0
    for q in range(nq):
        tq = query[q]
        while e_idx < ne and events[e_idx] < tq:
            te = events[e_idx]
            cum, s1, s2 = _advance(kind, mu, beta, te - t0, cum, s1, s2)
            t0 = te
            if kind == KIND_EXP:
                s1 += a * beta
            else:
                s1 += a
            e_idx += 1
        cum, s1, s2 = _advance(kind, mu, beta, tq - t0, cum, s1, s2)
        t0 = tq
        lam = mu + (s1 if kind == KIND_EXP else s2)
        left[q] = lam
        jump = 0.0
        j = e_idx
        while j < ne and events[j] == tq:
            jump += a * beta if kind == KIND_EXP else 0.0
            j += 1
        right[q] = lam + jump
        comp[q] = cum
    return left, right, comp


def _advance(kind, mu, beta, h, cum, s1, s2):
    e = math.exp(-beta * h)
    if kind == KIND_EXP:
        cum += mu * h + s1 * (1.0 - e) / beta
        s1 *= e
    else:
        cum += mu * h + s2 * (1.0 - e) / beta + s1 * (1.0 - e * (1.0 + beta * h))
        s2 = e * (s2 + beta * beta * s1 * h)
        s1 *= e
    return cum, s1, s2
