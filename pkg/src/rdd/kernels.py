"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The numba path is used when numba imports cleanly and the environment
variable ``RDD_USE_NUMBA`` is not set to ``0``/``false``/``no``.  Both
paths are always importable (``nb_*`` / ``np_*``) so tests and the
benchmark script can compare them directly.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    _HAVE_NUMBA = False


def _flag_enabled(value: str | None) -> bool:
    if value is None:
        return True
    return value.strip().lower() not in {"0", "false", "no", "off"}


USE_NUMBA = _HAVE_NUMBA and _flag_enabled(os.environ.get("RDD_USE_NUMBA"))


def _njit(func):
    if not _HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


# --------------------------------------------------------------------------
# row-wise log-domain softmax
# --------------------------------------------------------------------------


def np_row_softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax of every row of ``logits``; ``-inf`` entries map to exact zeros."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    out = np.exp(shifted)
    out /= out.sum(axis=1, keepdims=True)
    return out


@_njit
def nb_row_softmax(logits):
    m, n = logits.shape
    out = np.empty((m, n))
    for i in range(m):
        row_max = -np.inf
        for j in range(n):
            if logits[i, j] > row_max:
                row_max = logits[i, j]
        total = 0.0
        for j in range(n):
            v = math.exp(logits[i, j] - row_max)
            out[i, j] = v
            total += v
        for j in range(n):
            out[i, j] /= total
    return out


# --------------------------------------------------------------------------
# quartic Gromov-type distortion (oracle only)
# --------------------------------------------------------------------------


def np_gromov_quartic(dx, dy, w, p):
    joint = w * p[:, None]
    total = 0.0
    # one i at a time keeps the temporary at M*N*N floats
    for i in range(dx.shape[0]):
        diff = (dx[i][:, None, None] - dy[None, :, :]) ** 2  # (i', j, j')
        # sum_{i', j, j'} diff * joint[i, j] * joint[i', j']
        inner = np.einsum("ajb,ab->j", diff, joint)
        total += float(np.dot(joint[i], inner))
    return total


@_njit
def nb_gromov_quartic(dx, dy, w, p):
    m = dx.shape[0]
    n = dy.shape[0]
    # Neumaier-compensated accumulation
    total = 0.0
    comp = 0.0
    for i in range(m):
        for ii in range(m):
            pp = p[i] * p[ii]
            if pp == 0.0:
                continue
            a = dx[i, ii]
            for j in range(n):
                wij = w[i, j]
                if wij == 0.0:
                    continue
                for jj in range(n):
                    d = a - dy[j, jj]
                    term = d * d * wij * w[ii, jj] * pp
                    t = total + term
                    if abs(total) >= abs(term):
                        comp += (total - t) + term
                    else:
                        comp += (term - t) + total
                    total = t
    return total + comp


# --------------------------------------------------------------------------
# multiplicative mirror descent for min r'Qr over the simplex
# --------------------------------------------------------------------------


def np_simplex_md(Q, r0, step, iters):
    r = r0.copy()
    logr = np.log(r)
    for _ in range(iters):
        logr = logr - step * (2.0 * (Q @ r))
        logr -= logr.max()
        r = np.exp(logr)
        total = r.sum()
        r /= total
        logr -= math.log(total)
    return r


@_njit
def nb_simplex_md(Q, r0, step, iters):
    n = r0.shape[0]
    r = r0.copy()
    logr = np.log(r)
    g = np.empty(n)
    for _ in range(iters):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += Q[j, k] * r[k]
            g[j] = 2.0 * acc
        top = -np.inf
        for j in range(n):
            logr[j] = logr[j] - step * g[j]
            if logr[j] > top:
                top = logr[j]
        total = 0.0
        for j in range(n):
            logr[j] -= top
            r[j] = math.exp(logr[j])
            total += r[j]
        lt = math.log(total)
        for j in range(n):
            r[j] /= total
            logr[j] -= lt
    return r


# --------------------------------------------------------------------------
# pairwise-exchange polish for min r'Qr over the simplex
# --------------------------------------------------------------------------


def np_simplex_pairwise(Q, r0, tol, max_steps):
    r = r0.copy()
    g = 2.0 * (Q @ r)
    for _ in range(max_steps):
        a = int(np.argmin(g))
        support = np.flatnonzero(r > 0)
        b = int(support[np.argmax(g[support])])
        gap = g[b] - g[a]
        if gap <= tol or a == b:
            break
        curv = Q[a, a] + Q[b, b] - 2.0 * Q[a, b]
        t = r[b]
        if curv > 0:
            t = min(t, gap / (2.0 * curv))
        r[a] += t
        r[b] -= t
        if r[b] < 1e-300:
            r[b] = 0.0
        g += 2.0 * t * (Q[:, a] - Q[:, b])
    return r


@_njit
def nb_simplex_pairwise(Q, r0, tol, max_steps):
    n = r0.shape[0]
    r = r0.copy()
    g = np.empty(n)
    for j in range(n):
        acc = 0.0
        for k in range(n):
            acc += Q[j, k] * r[k]
        g[j] = 2.0 * acc
    for _ in range(max_steps):
        a = 0
        b = -1
        for j in range(n):
            if g[j] < g[a]:
                a = j
            if r[j] > 0 and (b < 0 or g[j] > g[b]):
                b = j
        gap = g[b] - g[a]
        if gap <= tol or a == b:
            break
        curv = Q[a, a] + Q[b, b] - 2.0 * Q[a, b]
        t = r[b]
        if curv > 0:
            t = min(t, gap / (2.0 * curv))
        r[a] += t
        r[b] -= t
        if r[b] < 1e-300:
            r[b] = 0.0
        for j in range(n):
            g[j] += 2.0 * t * (Q[j, a] - Q[j, b])
    return r


if USE_NUMBA:
    row_softmax = nb_row_softmax
    gromov_quartic = nb_gromov_quartic
    simplex_md = nb_simplex_md
    simplex_pairwise = nb_simplex_pairwise
else:
    row_softmax = np_row_softmax
    gromov_quartic = np_gromov_quartic
    simplex_md = np_simplex_md
    simplex_pairwise = np_simplex_pairwise

BACKEND = "numba" if USE_NUMBA else "numpy"

__all__ = [
    "BACKEND",
    "USE_NUMBA",
    "gromov_quartic",
    "nb_gromov_quartic",
    "nb_row_softmax",
    "nb_simplex_md",
    "nb_simplex_pairwise",
    "np_gromov_quartic",
    "np_row_softmax",
    "np_simplex_md",
    "np_simplex_pairwise",
    "row_softmax",
    "simplex_md",
    "simplex_pairwise",
]
