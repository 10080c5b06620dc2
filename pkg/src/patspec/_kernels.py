"""
Hot loops of the time-domain stages, in two interchangeable backends.

``cosine_synthesis``  rows[b, j] = sum_l amps[b, l] * cos(lam[l] * t_j)
``damped_sine_simpson``  composite Simpson of exp(-eps t) g(t) sin(lam t)

Backend selection: ``PATSPEC_BACKEND=numpy`` forces the pure-numpy path;
anything else (default ``numba``) uses the @njit kernels when numba imports.
Both paths are always importable as ``*_numpy`` / ``*_numba`` for testing
and benchmarking.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional accelerator
    numba = None
else:
    # the bundled TBB is too old for numba; skip the probe and its warning
    if "NUMBA_THREADING_LAYER" not in os.environ:
        numba.config.THREADING_LAYER = "workqueue"

HAVE_NUMBA = numba is not None
BACKEND = "numba" if HAVE_NUMBA and os.environ.get("PATSPEC_BACKEND", "numba").lower() != "numpy" else "numpy"


# ---------------------------------------------------------------- numpy path


def cosine_synthesis_numpy(amps, lam, dt, n_steps):
    t = dt * np.arange(n_steps + 1)
    return np.asarray(amps, dtype=float) @ np.cos(np.outer(lam, t))


def _simpson_weights(m):
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w


def damped_sine_simpson_numpy(series, lam, eps, dt, m):
    """Simpson integrals for every (row, eps) pair.

    series: (K, N+1) samples; lam: (K,) sine frequencies; eps, m: (J,)
    damping values and (even) interval counts. Returns (K, J).
    """
    series = np.atleast_2d(series)
    K = series.shape[0]
    out = np.empty((K, len(eps)))
    for j, (e, mj) in enumerate(zip(eps, m)):
        t = dt * np.arange(mj + 1)
        w = _simpson_weights(mj) * np.exp(-e * t) * (dt / 3.0)
        out[:, j] = np.einsum("kn,kn->k", series[:, : mj + 1] * w, np.sin(np.outer(lam, t)))
    return out


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @numba.njit(parallel=True, cache=True)
    def cosine_synthesis_numba(amps, lam, dt, n_steps):
        nb, nl = amps.shape
        table = np.empty((nl, n_steps + 1))
        for l in numba.prange(nl):
            for j in range(n_steps + 1):
                table[l, j] = np.cos(lam[l] * (j * dt))
        out = np.zeros((nb, n_steps + 1))
        for b in numba.prange(nb):
            for l in range(nl):
                a = amps[b, l]
                for j in range(n_steps + 1):
                    out[b, j] += a * table[l, j]
        return out

    @numba.njit(parallel=True, cache=True)
    def damped_sine_simpson_numba(series, lam, eps, dt, m):
        K = series.shape[0]
        J = eps.shape[0]
        out = np.zeros((K, J))
        for k in numba.prange(K):
            for jj in range(J):
                mj = m[jj]
                e = eps[jj]
                acc = 0.0
                for n in range(mj + 1):
                    if n == 0 or n == mj:
                        w = 1.0
                    elif n % 2 == 1:
                        w = 4.0
                    else:
                        w = 2.0
                    t = n * dt
                    acc += w * np.exp(-e * t) * series[k, n] * np.sin(lam[k] * t)
                out[k, jj] = acc * dt / 3.0
        return out

else:  # pragma: no cover
    cosine_synthesis_numba = None
    damped_sine_simpson_numba = None


def cosine_synthesis(amps, lam, dt, n_steps):
    amps = np.ascontiguousarray(amps, dtype=float)
    lam = np.ascontiguousarray(lam, dtype=float)
    if BACKEND == "numba":
        return cosine_synthesis_numba(amps, lam, float(dt), int(n_steps))
    return cosine_synthesis_numpy(amps, lam, dt, n_steps)


def damped_sine_simpson(series, lam, eps, dt, m):
    series = np.ascontiguousarray(np.atleast_2d(series), dtype=float)
    lam = np.ascontiguousarray(np.atleast_1d(lam), dtype=float)
    eps = np.ascontiguousarray(np.atleast_1d(eps), dtype=float)
    m = np.ascontiguousarray(np.atleast_1d(m), dtype=np.int64)
    if BACKEND == "numba":
        return damped_sine_simpson_numba(series, lam, eps, float(dt), m)
    return damped_sine_simpson_numpy(series, lam, eps, dt, m)
