"""Numpy twins of the compiled kernels in ``_kernels.pyx``.

Same signatures, same results to round-off; only slower when the kernel
is called with many cheap steps.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded


def _padded(u: np.ndarray, periodic: bool) -> np.ndarray:
    if periodic:
        return np.concatenate([u[-2:], u, u[:2]])
    return np.concatenate([[-u[0], 0.0], u, [0.0, -u[-1]]])


def _stencil(u: np.ndarray, w: np.ndarray, periodic: bool) -> np.ndarray:
    a = _padded(u, periodic)
    w2 = w[2] if len(w) > 2 else 0.0
    return w[0] * a[2:-2] + w[1] * (a[1:-3] + a[3:-1]) + w2 * (a[:-4] + a[4:])


def mfi_descent(u, v, w, tau, n_iter, periodic, renorm_every=32):
    a = np.array(u, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    r_prev = 0.0
    max_rise = -np.inf
    for it in range(n_iter):
        hp = _stencil(a, w, periodic) + v * a
        r = float(a @ hp) / float(a @ a)
        if it > 0 and r - r_prev > max_rise:
            max_rise = r - r_prev
        r_prev = r
        a = a - tau * hp
        if (it + 1) % renorm_every == 0:
            a /= np.sqrt(a @ a)
    a /= np.sqrt(a @ a)
    r = float(a @ (_stencil(a, w, periodic) + v * a))
    u[:] = a
    if n_iter < 2:
        max_rise = 0.0
    return r, float(max_rise)


def band_solve(a_band, rhs):
    p = (a_band.shape[0] - 1) // 2
    # row storage band[d, i] = A[i, i+d-p]  ->  LAPACK ab[p+i-j, j] = A[i, j]
    ab = _rows_to_lapack(np.asarray(a_band, dtype=complex), p)
    return solve_banded((p, p), ab, np.asarray(rhs, dtype=complex))


def _rows_to_lapack(band: np.ndarray, p: int) -> np.ndarray:
    m = band.shape[1]
    ab = np.zeros_like(band)
    for d in range(2 * p + 1):
        off = d - p
        if off >= 0:
            ab[p - off, off:] = band[d, : m - off]
        else:
            ab[p - off, : m + off] = band[d, -off:]
    return ab


def _band_matvec(band: np.ndarray, u: np.ndarray, p: int) -> np.ndarray:
    m = u.shape[0]
    out = band[p] * u
    for d in range(2 * p + 1):
        off = d - p
        if off > 0:
            out[: m - off] += band[d, : m - off] * u[off:]
        elif off < 0:
            out[-off:] += band[d, -off:] * u[: m + off]
    return out


def cn_evolve(u0, a_band, b_band, corner_rows, corner_cols, corner_b, z, cap_inv,
              n_steps, stride):
    a_band = np.asarray(a_band, dtype=complex)
    b_band = np.asarray(b_band, dtype=complex)
    p = (a_band.shape[0] - 1) // 2
    ab = _rows_to_lapack(a_band, p)
    rows = np.asarray(corner_rows, dtype=np.intp)
    cols = np.asarray(corner_cols, dtype=np.intp)
    cb = np.asarray(corner_b, dtype=complex)
    cur = np.array(u0, dtype=complex)
    out = np.empty((n_steps // stride + 1, cur.shape[0]), dtype=complex)
    out[0] = cur
    snap = 1
    for step in range(1, n_steps + 1):
        rhs = _band_matvec(b_band, cur, p)
        if len(rows):
            np.add.at(rhs, rows, cb * cur[cols])
        nxt = solve_banded((p, p), ab, rhs, check_finite=False)
        if len(rows):
            nxt = nxt - z @ (cap_inv @ nxt[cols])
        cur = nxt
        if step % stride == 0:
            out[snap] = cur
            snap += 1
    return out


def kg_leapfrog(prev, curr, w, mass_coef, n_steps, stride, periodic):
    old = np.array(prev, dtype=float)
    cur = np.array(curr, dtype=float)
    w = np.asarray(w, dtype=float)
    out = np.empty((n_steps // stride + 1, cur.shape[0]))
    out[0] = cur
    snap = 1
    for step in range(1, n_steps + 1):
        new = 2.0 * cur - old + _stencil(cur, w, periodic) - mass_coef * cur
        old, cur = cur, new
        if step % stride == 0:
            out[snap] = cur
            snap += 1
    return out
