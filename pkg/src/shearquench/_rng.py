"""Counter-based random numbers keyed by (seed, path, step).

Every Monte Carlo draw is a pure function of its coordinates, so estimates
are bitwise reproducible no matter how paths are batched or scheduled.  The
generator is a splitmix64-style avalanche hash; Gaussians come from
Box-Muller on two hash slots.  Not cryptographic; statistically fine for
sampling.
"""
from __future__ import annotations

import numpy as np

_C0 = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_K_PATH = np.uint64(0xA0761D6478BD642F)
_K_STEP = np.uint64(0xE7037ED1A0B428DB)
_K_SLOT = np.uint64(0x8EBC6AF09C88C6E3)
_INV253 = float(2.0 ** -53)


def _mix(x):
    x = (x + _C0) & np.uint64(0xFFFFFFFFFFFFFFFF)
    x ^= x >> np.uint64(30)
    x = (x * _C1) & np.uint64(0xFFFFFFFFFFFFFFFF)
    x ^= x >> np.uint64(27)
    x = (x * _C2) & np.uint64(0xFFFFFFFFFFFFFFFF)
    x ^= x >> np.uint64(31)
    return x


def uniforms(seed: int, paths, steps, slot: int):
    """Uniforms in (0,1), one per (path, step) pair; broadcasts its arguments."""
    paths = np.asarray(paths, dtype=np.uint64)
    steps = np.asarray(steps, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
        x = _mix(x ^ (paths * _K_PATH))
        x = _mix(x ^ (steps * _K_STEP))
        x = _mix(x ^ (np.uint64(slot) * _K_SLOT))
    return ((x >> np.uint64(11)).astype(np.float64) + 0.5) * _INV253


def normals(seed: int, paths, steps):
    """Standard normals keyed by (seed, path, step).

    Steps are consumed in Box-Muller pairs: step s draws two uniforms at
    pair index s >> 1 and takes the cosine branch for even s, the sine
    branch for odd s.  Still a pure function of (seed, path, step).
    """
    steps = np.asarray(steps, dtype=np.uint64)
    pair = steps >> np.uint64(1)
    u1 = uniforms(seed, paths, pair, 0)
    u2 = uniforms(seed, paths, pair, 1)
    r = np.sqrt(-2.0 * np.log(u1))
    phi = 2.0 * np.pi * u2
    odd = (steps & np.uint64(1)).astype(bool)
    return np.where(odd, r * np.sin(phi), r * np.cos(phi))


def normals_block(seed: int, path_lo: int, n_paths: int, step_lo: int, n_steps: int):
    """(n_paths, n_steps) block of normals for paths [path_lo, ...) and steps [step_lo, ...)."""
    p = np.arange(path_lo, path_lo + n_paths, dtype=np.uint64)[:, None]
    s = np.arange(step_lo, step_lo + n_steps, dtype=np.uint64)[None, :]
    return normals(seed, p, s)
