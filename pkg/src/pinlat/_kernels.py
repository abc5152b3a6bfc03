"""Compiled RK4 kernels for the lattice flows.

Nonlinearities enter as ascending polynomial coefficient arrays (see
``NormalFamily.u_poly``). Summation order inside each right-hand side is
fixed, so runs are bit-reproducible on one platform.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def horner(c, x):
    acc = 0.0
    for k in range(c.shape[0] - 1, -1, -1):
        acc = acc * x + c[k]
    return acc


# 1D chain in tail-resolved coordinates -----------------------------------------
#
# p_n = anchor_n + d_n with anchor -1 for n < 0 and +1 for n >= 0, ghosts d = 0.
# ``jump`` carries the discrete Laplacian of the anchors (+2 at n=-1, -2 at n=0).


@njit(cache=True, nogil=True)
def rhs_chain(d, jump, cl, cr, nleft, out):
    m = d.shape[0]
    for i in range(m):
        left = d[i - 1] if i > 0 else 0.0
        right = d[i + 1] if i < m - 1 else 0.0
        if i < nleft:
            fx = horner(cl, d[i])
        else:
            fx = horner(cr, d[i])
        out[i] = (right + left - 2.0 * d[i]) + jump[i] - fx


@njit(cache=True, nogil=True)
def rk4_chain(d, jump, cl, cr, nleft, dt, nsteps, tol):
    """Advance up to ``nsteps``; stop early once sup|rhs| < tol.

    Returns (steps taken, sup|rhs| at the returned state).
    """
    m = d.shape[0]
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    for step in range(nsteps):
        rhs_chain(d, jump, cl, cr, nleft, k1)
        norm = 0.0
        for i in range(m):
            if abs(k1[i]) > norm:
                norm = abs(k1[i])
        if norm < tol:
            return step, norm
        for i in range(m):
            tmp[i] = d[i] + 0.5 * dt * k1[i]
        rhs_chain(tmp, jump, cl, cr, nleft, k2)
        for i in range(m):
            tmp[i] = d[i] + 0.5 * dt * k2[i]
        rhs_chain(tmp, jump, cl, cr, nleft, k3)
        for i in range(m):
            tmp[i] = d[i] + dt * k3[i]
        rhs_chain(tmp, jump, cl, cr, nleft, k4)
        for i in range(m):
            d[i] = d[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    rhs_chain(d, jump, cl, cr, nleft, k1)
    norm = 0.0
    for i in range(m):
        if abs(k1[i]) > norm:
            norm = abs(k1[i])
    return nsteps, norm


# helical strip -------------------------------------------------------------------
#
# u has shape (W, q); u[i, q] := u[i + s, 0] and u[i, -1] := u[i - s, q - 1];
# columns outside 0..W-1 are clamped to ``lo`` (left) and ``hi`` (right).


@njit(cache=True, nogil=True)
def _site(u, i, j, lo, hi):
    w = u.shape[0]
    if i < 0:
        return lo
    if i >= w:
        return hi
    return u[i, j]


@njit(cache=True, nogil=True)
def rhs_strip(u, s, coef, lo, hi, out):
    w, q = u.shape
    for i in range(w):
        for j in range(q):
            c = u[i, j]
            east = _site(u, i + 1, j, lo, hi)
            west = _site(u, i - 1, j, lo, hi)
            if j + 1 < q:
                north = u[i, j + 1]
            else:
                north = _site(u, i + s, 0, lo, hi)
            if j > 0:
                south = u[i, j - 1]
            else:
                south = _site(u, i - s, q - 1, lo, hi)
            out[i, j] = (east + west + north + south - 4.0 * c) - horner(coef, c)


@njit(cache=True, nogil=True)
def rk4_strip(u, s, coef, dt, nsteps, lo=-1.0, hi=1.0):
    """Advance ``u`` in place; returns sup|u| seen (for blow-up detection)."""
    w, q = u.shape
    k1 = np.empty((w, q))
    k2 = np.empty((w, q))
    k3 = np.empty((w, q))
    k4 = np.empty((w, q))
    tmp = np.empty((w, q))
    peak = 0.0
    for _ in range(nsteps):
        rhs_strip(u, s, coef, lo, hi, k1)
        for i in range(w):
            for j in range(q):
                tmp[i, j] = u[i, j] + 0.5 * dt * k1[i, j]
        rhs_strip(tmp, s, coef, lo, hi, k2)
        for i in range(w):
            for j in range(q):
                tmp[i, j] = u[i, j] + 0.5 * dt * k2[i, j]
        rhs_strip(tmp, s, coef, lo, hi, k3)
        for i in range(w):
            for j in range(q):
                tmp[i, j] = u[i, j] + dt * k3[i, j]
        rhs_strip(tmp, s, coef, lo, hi, k4)
        for i in range(w):
            for j in range(q):
                u[i, j] = u[i, j] + dt / 6.0 * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
                if abs(u[i, j]) > peak:
                    peak = abs(u[i, j])
        if peak > 2.0 or peak != peak:
            return peak
    return peak
