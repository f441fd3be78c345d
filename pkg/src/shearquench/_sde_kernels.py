"""Numba path kernels for the Monte Carlo layer.

Each Gaussian increment is the same pure function of (seed, path, step) as
in _rng (splitmix64 avalanche + Box-Muller), so the per-path streams match
the vectorized fallback to floating-point library precision and results
never depend on batching or thread schedule.  Only imported when numba is
available.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange

_C0 = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_K_PATH = np.uint64(0xA0761D6478BD642F)
_K_STEP = np.uint64(0xE7037ED1A0B428DB)
_K_SLOT = np.uint64(0x8EBC6AF09C88C6E3)
_INV253 = 2.0 ** -53
_TWO_PI = 2.0 * np.pi


@njit(cache=True, inline="always")
def _mix(x):
    x = x + _C0
    x ^= x >> np.uint64(30)
    x = x * _C1
    x ^= x >> np.uint64(27)
    x = x * _C2
    x ^= x >> np.uint64(31)
    return x


@njit(cache=True, inline="always")
def _path_key(seed, path):
    return _mix(_mix(seed) ^ (path * _K_PATH))


@njit(cache=True, inline="always")
def _fin(x):
    return (np.float64(x >> np.uint64(11)) + 0.5) * _INV253


@njit(cache=True, inline="always")
def _normal_pair(key, pair):
    """Both Box-Muller outputs for (path key, pair index); bit-equals _rng."""
    x = _mix(key ^ (pair * _K_STEP))
    u1 = _fin(_mix(x))
    u2 = _fin(_mix(x ^ _K_SLOT))
    r = np.sqrt(-2.0 * np.log(u1))
    phi = _TWO_PI * u2
    return r * np.cos(phi), r * np.sin(phi)


@njit(cache=True, inline="always")
def _interp_periodic(w, table, h):
    n = table.shape[0]
    pos = (w - np.floor(w / h) * h) * (n / h)
    i0 = int(pos)
    frac = pos - i0
    if i0 >= n:
        i0 = 0
        frac = 0.0
    i1 = i0 + 1
    if i1 == n:
        i1 = 0
    return (1.0 - frac) * table[i0] + frac * table[i1]


@njit(cache=True, parallel=True)
def integrate_u(out, table, h, y0, dt, n_steps, seed, n_paths):
    """Trapezoid-in-time int_0^{n dt} u(W_s) ds per path."""
    sq = np.sqrt(dt)
    sd = np.uint64(seed)
    for p in prange(n_paths):
        key = _path_key(sd, np.uint64(p))
        w = y0
        up = _interp_periodic(w, table, h)
        acc = 0.0
        n0 = 0.0
        n1 = 0.0
        for s in range(n_steps):
            if s & 1 == 0:
                n0, n1 = _normal_pair(key, np.uint64(s >> 1))
                xi = n0
            else:
                xi = n1
            w = w + sq * xi
            un = _interp_periodic(w, table, h)
            acc += 0.5 * (up + un) * dt
            up = un
        out[p] = acc


@njit(cache=True, parallel=True)
def survival_weights(out, y0, lo, hi, dt, n_steps, seed, n_paths):
    """Probability weight of never exiting (lo, hi), Brownian-bridge corrected."""
    sq = np.sqrt(dt)
    sd = np.uint64(seed)
    for p in prange(n_paths):
        key = _path_key(sd, np.uint64(p))
        w = y0
        wgt = 1.0
        n0 = 0.0
        n1 = 0.0
        for s in range(n_steps):
            if s & 1 == 0:
                n0, n1 = _normal_pair(key, np.uint64(s >> 1))
                xi = n0
            else:
                xi = n1
            wn = w + sq * xi
            if wn <= lo or wn >= hi:
                wgt = 0.0
                break
            wgt *= (1.0 - np.exp(-2.0 * (w - lo) * (wn - lo) / dt)) * \
                   (1.0 - np.exp(-2.0 * (hi - w) * (hi - wn) / dt))
            w = wn
        out[p] = wgt


@njit(cache=True, parallel=True)
def ito_residuals(out, u_tab, v_tab, z_tab, h, y0, alpha, dt, n_steps, seed, n_paths):
    """Left minus right side of the Ito identity per path (left-point sums)."""
    sq = np.sqrt(dt)
    sd = np.uint64(seed)
    z0 = _interp_periodic(y0, z_tab, h)
    for p in prange(n_paths):
        key = _path_key(sd, np.uint64(p))
        w = y0
        lhs = 0.0
        mart = 0.0
        n0 = 0.0
        n1 = 0.0
        for s in range(n_steps):
            if s & 1 == 0:
                n0, n1 = _normal_pair(key, np.uint64(s >> 1))
                xi = n0
            else:
                xi = n1
            dw = sq * xi
            lhs += _interp_periodic(w, u_tab, h) * dt
            mart += _interp_periodic(w, v_tab, h) * dw
            w = w + dw
        zT = _interp_periodic(w, z_tab, h)
        out[p] = lhs / alpha - ((2.0 / alpha) * (zT - z0) - 2.0 * mart / alpha)


@njit(cache=True, parallel=True)
def martingale_samples(out, v_tab, h, y0, alpha, dt, n_steps, seed, n_paths):
    """M(y, alpha, .) = (1/alpha) int_0^{alpha^2} v(W_s) dW_s per path."""
    sq = np.sqrt(dt)
    sd = np.uint64(seed)
    for p in prange(n_paths):
        key = _path_key(sd, np.uint64(p))
        w = y0
        acc = 0.0
        n0 = 0.0
        n1 = 0.0
        for s in range(n_steps):
            if s & 1 == 0:
                n0, n1 = _normal_pair(key, np.uint64(s >> 1))
                xi = n0
            else:
                xi = n1
            dw = sq * xi
            acc += _interp_periodic(w, v_tab, h) * dw
            w = w + dw
        out[p] = acc / alpha
