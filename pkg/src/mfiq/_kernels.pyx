# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.

Every function here has a numpy twin with the same signature in
``mfiq._fallback``; ``mfiq._backend`` picks one at import time.

Stencils are passed as scaled weights ``w = (w0, w1[, w2])`` so that
``(L u)_j = w0*u_j + w1*(u_{j-1} + u_{j+1}) + w2*(u_{j-2} + u_{j+2})``.
Dirichlet unknowns are the interior points; the wall sits one spacing
outside them and the ghost two spacings out is the odd reflection.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline void _fill_ghosts(double* a, Py_ssize_t m, bint periodic) noexcept nogil:
    # a has two ghost cells on each side; unknowns live in a[2:m+2]
    if periodic:
        a[0] = a[m]
        a[1] = a[m + 1]
        a[m + 2] = a[2]
        a[m + 3] = a[3]
    else:
        a[1] = 0.0
        a[0] = -a[2]
        a[m + 2] = 0.0
        a[m + 3] = -a[m + 1]


cdef inline double _rayleigh(double* a, const double* v, double w0, double w1,
                             double w2, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t j
    cdef double hp, e = 0.0, nn = 0.0
    for j in range(2, m + 2):
        hp = (w0 * a[j] + w1 * (a[j - 1] + a[j + 1])
              + w2 * (a[j - 2] + a[j + 2]) + v[j - 2] * a[j])
        e += a[j] * hp
        nn += a[j] * a[j]
    return e / nn


def mfi_descent(double[::1] u, const double[::1] v, const double[::1] w,
                double tau, Py_ssize_t n_iter, bint periodic,
                Py_ssize_t renorm_every=32):
    """Apply ``n_iter`` steps of ``u <- u - tau*(L u + v*u)`` in place.

    ``u`` is rescaled to unit Euclidean norm on return. Returns the
    Rayleigh quotient of the final iterate and the largest increase of
    the Rayleigh quotient between consecutive iterates.
    """
    cdef Py_ssize_t m = u.shape[0]
    cdef Py_ssize_t j, it
    cdef double w0 = w[0]
    cdef double w1 = w[1]
    cdef double w2 = w[2] if w.shape[0] > 2 else 0.0
    cdef double hp, e, nn, r, s
    cdef double r_prev = 0.0
    cdef double max_rise = -1e300
    buf_a = np.zeros(m + 4)
    buf_b = np.zeros(m + 4)
    cdef double[::1] mva = buf_a
    cdef double[::1] mvb = buf_b
    cdef double* a = &mva[0]
    cdef double* b = &mvb[0]
    cdef double* t
    cdef const double* vp = &v[0]

    for j in range(m):
        a[j + 2] = u[j]
    with nogil:
        for it in range(n_iter):
            _fill_ghosts(a, m, periodic)
            e = 0.0
            nn = 0.0
            for j in range(2, m + 2):
                hp = (w0 * a[j] + w1 * (a[j - 1] + a[j + 1])
                      + w2 * (a[j - 2] + a[j + 2]) + vp[j - 2] * a[j])
                e += a[j] * hp
                nn += a[j] * a[j]
                b[j] = a[j] - tau * hp
            r = e / nn
            if it > 0 and r - r_prev > max_rise:
                max_rise = r - r_prev
            r_prev = r
            t = a
            a = b
            b = t
            if (it + 1) % renorm_every == 0:
                nn = 0.0
                for j in range(2, m + 2):
                    nn += a[j] * a[j]
                s = 1.0 / sqrt(nn)
                for j in range(2, m + 2):
                    a[j] *= s
        nn = 0.0
        for j in range(2, m + 2):
            nn += a[j] * a[j]
        s = 1.0 / sqrt(nn)
        for j in range(2, m + 2):
            a[j] *= s
        _fill_ghosts(a, m, periodic)
        r = _rayleigh(a, vp, w0, w1, w2, m)
    for j in range(m):
        u[j] = a[j + 2]
    if n_iter < 2:
        max_rise = 0.0
    return r, max_rise


cdef void _band_lu(double complex[:, ::1] band, double complex[:, ::1] lower,
                   Py_ssize_t p) noexcept nogil:
    # Doolittle elimination without pivoting; band[d, i] = A[i, i + d - p]
    cdef Py_ssize_t m = band.shape[1]
    cdef Py_ssize_t i, k, c
    cdef double complex piv, l
    for i in range(m):
        piv = band[p, i]
        for k in range(1, p + 1):
            if i + k >= m:
                break
            l = band[p - k, i + k] / piv
            lower[k, i + k] = l
            band[p - k, i + k] = 0.0
            for c in range(1, p + 1):
                if i + c >= m:
                    break
                band[p - k + c, i + k] = band[p - k + c, i + k] - l * band[p + c, i]


cdef void _band_solve(double complex[:, ::1] band, double complex[:, ::1] lower,
                      Py_ssize_t p, double complex* y) noexcept nogil:
    cdef Py_ssize_t m = band.shape[1]
    cdef Py_ssize_t i, k
    cdef double complex acc
    for i in range(m):
        acc = y[i]
        for k in range(1, p + 1):
            if i - k < 0:
                break
            acc = acc - lower[k, i] * y[i - k]
        y[i] = acc
    for i in range(m - 1, -1, -1):
        acc = y[i]
        for k in range(1, p + 1):
            if i + k >= m:
                break
            acc = acc - band[p + k, i] * y[i + k]
        y[i] = acc / band[p, i]


def band_solve(a_band, rhs):
    """Solve one banded system (no pivoting). Used for Woodbury set-up."""
    cdef Py_ssize_t p = (a_band.shape[0] - 1) // 2
    band = np.array(a_band, dtype=np.complex128, order="C")
    lower = np.zeros_like(band)
    _band_lu(band, lower, p)
    out = np.array(rhs, dtype=np.complex128, order="F")
    cdef double complex[::1, :] mv = out
    cdef Py_ssize_t col
    for col in range(out.shape[1]):
        _band_solve(band, lower, p, &mv[0, col])
    return out


def cn_evolve(double complex[::1] u0, a_band, b_band,
              const Py_ssize_t[::1] corner_rows, const Py_ssize_t[::1] corner_cols,
              const double complex[::1] corner_b, double complex[:, ::1] z,
              double complex[:, ::1] cap_inv, Py_ssize_t n_steps, Py_ssize_t stride):
    """Crank-Nicolson stepping ``A u_new = B u_old`` for banded A, B.

    Corner entries (periodic wrap) enter A through a Woodbury correction:
    ``z = A_band^-1 U`` and ``cap_inv = (I + V^T z)^-1`` are precomputed by
    the caller. Returns the snapshots taken every ``stride`` steps,
    starting with ``u0``.
    """
    cdef Py_ssize_t m = u0.shape[0]
    cdef Py_ssize_t p = (a_band.shape[0] - 1) // 2
    cdef Py_ssize_t n_snap = n_steps // stride + 1
    cdef Py_ssize_t r = corner_rows.shape[0]
    cdef Py_ssize_t step, i, d, j, e, f, snap = 1
    cdef double complex acc
    band_np = np.array(a_band, dtype=np.complex128, order="C")
    lower_np = np.zeros_like(band_np)
    cdef double complex[:, ::1] band = band_np
    cdef double complex[:, ::1] lower = lower_np
    cdef double complex[:, ::1] bb = np.ascontiguousarray(b_band, dtype=np.complex128)
    out_np = np.empty((n_snap, m), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_np
    cur_np = np.array(u0, dtype=np.complex128)
    nxt_np = np.empty(m, dtype=np.complex128)
    tvec_np = np.empty(max(r, 1), dtype=np.complex128)
    svec_np = np.empty(max(r, 1), dtype=np.complex128)
    cdef double complex[::1] mv_cur = cur_np
    cdef double complex[::1] mv_nxt = nxt_np
    cdef double complex[::1] tvec = tvec_np
    cdef double complex[::1] svec = svec_np
    cdef double complex* cur = &mv_cur[0]
    cdef double complex* nxt = &mv_nxt[0]
    cdef double complex* swap

    for i in range(m):
        out[0, i] = cur[i]
    with nogil:
        _band_lu(band, lower, p)
        for step in range(1, n_steps + 1):
            for i in range(m):
                acc = 0.0
                for d in range(2 * p + 1):
                    j = i + d - p
                    if 0 <= j < m:
                        acc = acc + bb[d, i] * cur[j]
                nxt[i] = acc
            for e in range(r):
                nxt[corner_rows[e]] = nxt[corner_rows[e]] + corner_b[e] * cur[corner_cols[e]]
            _band_solve(band, lower, p, nxt)
            if r > 0:
                for e in range(r):
                    tvec[e] = nxt[corner_cols[e]]
                for e in range(r):
                    acc = 0.0
                    for f in range(r):
                        acc = acc + cap_inv[e, f] * tvec[f]
                    svec[e] = acc
                for i in range(m):
                    acc = 0.0
                    for e in range(r):
                        acc = acc + z[i, e] * svec[e]
                    nxt[i] = nxt[i] - acc
            swap = cur
            cur = nxt
            nxt = swap
            if step % stride == 0:
                for i in range(m):
                    out[snap, i] = cur[i]
                snap += 1
    return out_np


def kg_leapfrog(const double[::1] prev, const double[::1] curr, const double[::1] w,
                double mass_coef, Py_ssize_t n_steps, Py_ssize_t stride,
                bint periodic):
    """Leapfrog ``u+ = 2u - u- + (L u) - mass_coef*u`` on real unknowns.

    ``w`` already carries the factor ``(c dt)^2``. Returns snapshots of the
    current level every ``stride`` steps, starting with ``curr``.
    """
    cdef Py_ssize_t m = curr.shape[0]
    cdef Py_ssize_t n_snap = n_steps // stride + 1
    cdef Py_ssize_t j, step, snap = 1
    cdef double w0 = w[0]
    cdef double w1 = w[1]
    cdef double w2 = w[2] if w.shape[0] > 2 else 0.0
    out_np = np.empty((n_snap, m))
    cdef double[:, ::1] out = out_np
    bufs = [np.zeros(m + 4), np.zeros(m + 4), np.zeros(m + 4)]
    cdef double[::1] mv0 = bufs[0]
    cdef double[::1] mv1 = bufs[1]
    cdef double[::1] mv2 = bufs[2]
    cdef double* old = &mv0[0]
    cdef double* cur = &mv1[0]
    cdef double* new = &mv2[0]
    cdef double* t
    for j in range(m):
        old[j + 2] = prev[j]
        cur[j + 2] = curr[j]
        out[0, j] = curr[j]
    with nogil:
        for step in range(1, n_steps + 1):
            _fill_ghosts(cur, m, periodic)
            for j in range(2, m + 2):
                new[j] = (2.0 * cur[j] - old[j]
                          + w0 * cur[j] + w1 * (cur[j - 1] + cur[j + 1])
                          + w2 * (cur[j - 2] + cur[j + 2]) - mass_coef * cur[j])
            t = old
            old = cur
            cur = new
            new = t
            if step % stride == 0:
                for j in range(m):
                    out[snap, j] = cur[j + 2]
                snap += 1
    return out_np
