"""Inner loops that dominate runtime.

Each kernel has a numpy implementation (``*_numpy``) and a loop
implementation compiled by numba (``*_numba``).  The unsuffixed names are the
ones the rest of the package calls; they point at the numba variants unless
numba is missing or disabled through ``PATCHGRAPH_DISABLE_NUMBA``.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._accel import HAVE_NUMBA, njit

__all__ = ["im2col", "col2im", "jacobi_sweep", "BACKEND"]


# --- convolution lowering ----------------------------------------------------

def im2col_numpy(xp, k, stride):
    """Unfold a padded (C, Hp, Wp) array into (C*k*k, OH*OW) columns."""
    c, hp, wp = xp.shape
    oh = (hp - k) // stride + 1
    ow = (wp - k) // stride + 1
    win = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    win = win[:, :oh, :ow]
    return np.ascontiguousarray(win.transpose(0, 3, 4, 1, 2)).reshape(c * k * k, oh * ow)


def col2im_numpy(cols, shape, k, stride):
    """Adjoint of :func:`im2col_numpy`; returns the padded (C, Hp, Wp) array."""
    c, hp, wp = shape
    oh = (hp - k) // stride + 1
    ow = (wp - k) // stride + 1
    cols = cols.reshape(c, k, k, oh, ow)
    out = np.zeros(shape)
    for ki in range(k):
        for kj in range(k):
            out[:, ki:ki + stride * (oh - 1) + 1:stride,
                kj:kj + stride * (ow - 1) + 1:stride] += cols[:, ki, kj]
    return out


@njit
def _im2col_loops(xp, k, stride):
    c, hp, wp = xp.shape
    oh = (hp - k) // stride + 1
    ow = (wp - k) // stride + 1
    cols = np.empty((c * k * k, oh * ow))
    for ci in range(c):
        for ki in range(k):
            for kj in range(k):
                row = (ci * k + ki) * k + kj
                for i in range(oh):
                    src = i * stride + ki
                    for j in range(ow):
                        cols[row, i * ow + j] = xp[ci, src, j * stride + kj]
    return cols


@njit
def _col2im_loops(cols, c, hp, wp, k, stride):
    oh = (hp - k) // stride + 1
    ow = (wp - k) // stride + 1
    out = np.zeros((c, hp, wp))
    for ci in range(c):
        for ki in range(k):
            for kj in range(k):
                row = (ci * k + ki) * k + kj
                for i in range(oh):
                    dst = i * stride + ki
                    for j in range(ow):
                        out[ci, dst, j * stride + kj] += cols[row, i * ow + j]
    return out


def im2col_numba(xp, k, stride):
    return _im2col_loops(np.ascontiguousarray(xp, dtype=np.float64), k, stride)


def col2im_numba(cols, shape, k, stride):
    c, hp, wp = shape
    return _col2im_loops(np.ascontiguousarray(cols, dtype=np.float64), c, hp, wp, k, stride)


# --- cyclic Jacobi -----------------------------------------------------------

def _rotation(app, aqq, apq):
    theta = (aqq - app) / (2.0 * apq)
    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
    if theta < 0.0:
        t = -t
    c = 1.0 / np.sqrt(t * t + 1.0)
    return c, t * c


def jacobi_sweep_numpy(a, v):
    """One cyclic sweep of Jacobi rotations over the upper triangle, in place."""
    n = a.shape[0]
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = a[p, q]
            if apq == 0.0:
                continue
            c, s = _rotation(a[p, p], a[q, q], apq)
            colp = a[:, p].copy()
            colq = a[:, q]
            a[:, p] = c * colp - s * colq
            a[:, q] = s * colp + c * colq
            rowp = a[p, :].copy()
            rowq = a[q, :]
            a[p, :] = c * rowp - s * rowq
            a[q, :] = s * rowp + c * rowq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp = v[:, p].copy()
            vq = v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq


@njit
def _jacobi_sweep_loops(a, v):
    n = a.shape[0]
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = a[p, q]
            if apq == 0.0:
                continue
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
            if theta < 0.0:
                t = -t
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            for r in range(n):
                x = a[r, p]
                y = a[r, q]
                a[r, p] = c * x - s * y
                a[r, q] = s * x + c * y
            for r in range(n):
                x = a[p, r]
                y = a[q, r]
                a[p, r] = c * x - s * y
                a[q, r] = s * x + c * y
            a[p, q] = 0.0
            a[q, p] = 0.0
            for r in range(n):
                x = v[r, p]
                y = v[r, q]
                v[r, p] = c * x - s * y
                v[r, q] = s * x + c * y


def jacobi_sweep_numba(a, v):
    _jacobi_sweep_loops(a, v)


if HAVE_NUMBA:
    BACKEND = "numba"
    im2col, col2im, jacobi_sweep = im2col_numba, col2im_numba, jacobi_sweep_numba
else:
    BACKEND = "numpy"
    im2col, col2im, jacobi_sweep = im2col_numpy, col2im_numpy, jacobi_sweep_numpy
