"""Split-step building blocks for the strip solvers.

Fields are (ny, nx) float64, x contiguous.  One full step is

    half diffusion -> advection -> reaction -> half diffusion

with diffusion dimensionally split, advection done as a rigid per-row
semi-Lagrangian shift with cubic interpolation clipped to the neighboring
node range (unconditionally stable, exact for integer-cell shifts, creates
no new extrema), and the reaction advanced by one explicit midpoint step.

The theta-scheme weight per axis is max(1/2, 1 - 1/(2r)) with
r = kappa dt / d^2: plain Crank-Nicolson whenever the step is diffusively
resolved, blending toward implicit Euler exactly when needed to keep the
discrete maximum principle.  Numba kernels carry the heavy loops when
available; the scipy paths below produce the same results to roundoff.
"""
from __future__ import annotations

import numpy as np
from scipy.fft import dst, idst, irfft, rfft

from . import _kernels as K


def theta_for(r: float) -> float:
    """Smallest theta >= 1/2 giving a monotone theta-scheme at ratio r."""
    if r <= 0.0:
        return 0.5
    return max(0.5, 1.0 - 0.5 / r)


def _thomas_factors(beta: float, diag: np.ndarray):
    """Elimination factors for constant off-diagonal -beta and given diagonal."""
    n = len(diag)
    invD = np.empty(n)
    lo = np.empty(n)
    D = diag[0]
    invD[0] = 1.0 / D
    lo[0] = -beta * invD[0]
    for i in range(1, n):
        D = diag[i] + beta * lo[i - 1]
        invD[i] = 1.0 / D
        lo[i] = -beta * invD[i]
    return lo, invD


def _thomas_solve(lo, invD, beta, d):
    n = len(d)
    dp = np.empty(n)
    prev = 0.0
    for i in range(n):
        prev = (d[i] + beta * prev) * invD[i]
        dp[i] = prev
    x = np.empty(n)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - lo[i] * x[i + 1]
    return x


class _ThetaAxis:
    """Shared setup for a theta-scheme diffusion step along one axis."""

    def __init__(self, n: int, r: float, periodic: bool):
        self.n = n
        self.r = r
        self.theta = th = theta_for(r)
        self.rhs_a = 1.0 - 2.0 * (1.0 - th) * r
        self.rhs_b = (1.0 - th) * r
        self.beta = th * r
        b = 1.0 + 2.0 * th * r
        if not periodic:
            self.lo, self.invD = _thomas_factors(self.beta, np.full(n, b))
            return
        # Sherman-Morrison split: B = cyclic matrix minus rank-one corner term
        diag = np.full(n, b)
        diag[0] = 2.0 * b
        diag[-1] = b + self.beta**2 / b
        self.lo, self.invD = _thomas_factors(self.beta, diag)
        u = np.zeros(n)
        u[0] = -b
        u[-1] = -self.beta
        self.q = _thomas_solve(self.lo, self.invD, self.beta, u)
        vq = self.q[0] + (self.beta / b) * self.q[-1]
        self.denom = np.array([-b, 1.0 + vq])


class XDiffusion:
    """Theta-scheme heat step along x, zero-Dirichlet ghosts (absorbing)."""

    def __init__(self, nx: int, r: float):
        self.ax = _ThetaAxis(nx, r, periodic=False)
        if not K.HAVE_NUMBA:
            from scipy.linalg import cholesky_banded

            ab = np.zeros((2, nx))
            ab[0, 1:] = -self.ax.beta
            ab[1, :] = 1.0 + 2.0 * self.ax.beta
            self._cb = cholesky_banded(ab, lower=False, check_finite=False)

    def apply(self, T: np.ndarray, work: np.ndarray | None = None) -> np.ndarray:
        ax = self.ax
        if ax.r == 0.0:
            return T
        if K.HAVE_NUMBA:
            if work is None:
                work = np.empty_like(T)
            return K.thomas_rows(T, work, ax.beta, ax.lo, ax.invD, ax.rhs_a, ax.rhs_b)
        from scipy.linalg import cho_solve_banded

        rhs = ax.rhs_a * T
        rhs[:, 1:] += ax.rhs_b * T[:, :-1]
        rhs[:, :-1] += ax.rhs_b * T[:, 1:]
        out = cho_solve_banded((self._cb, False), rhs.T, check_finite=False)
        return np.ascontiguousarray(out.T)


class YDiffusion:
    """Theta-scheme heat step along y: periodic or Dirichlet walls."""

    def __init__(self, ny: int, r: float, bc: str):
        if bc not in ("periodic", "dirichlet"):
            raise ValueError(f"unknown y boundary condition '{bc}'")
        self.bc = bc
        self.ax = _ThetaAxis(ny, r, periodic=(bc == "periodic"))
        if not K.HAVE_NUMBA:
            th, r_ = self.ax.theta, r
            if bc == "periodic":
                lam = 2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(ny // 2 + 1) / ny)
            else:
                lam = 2.0 - 2.0 * np.cos(np.pi * np.arange(1, ny + 1) / (ny + 1))
            self._gain = (1.0 - (1.0 - th) * r_ * lam) / (1.0 + th * r_ * lam)

    def apply(self, T: np.ndarray, work: np.ndarray | None = None) -> np.ndarray:
        ax = self.ax
        if ax.r == 0.0:
            return T
        if K.HAVE_NUMBA:
            if self.bc == "periodic":
                return K.cyclic_thomas_cols(T, ax.beta, ax.lo, ax.invD, ax.q,
                                            ax.denom, ax.rhs_a, ax.rhs_b)
            return K.thomas_cols(T, ax.beta, ax.lo, ax.invD, ax.rhs_a, ax.rhs_b)
        if self.bc == "periodic":
            spec = rfft(T, axis=0)
            spec *= self._gain[:, None]
            return irfft(spec, n=T.shape[0], axis=0)
        spec = dst(T, type=1, axis=0)
        spec *= self._gain[:, None]
        return idst(spec, type=1, axis=0)


def advect_rows(T: np.ndarray, shift_cells: np.ndarray,
                out: np.ndarray | None = None) -> np.ndarray:
    """Shift row j by shift_cells[j] cells in +x; zero inflow, material exits."""
    if K.HAVE_NUMBA:
        if out is None:
            out = np.empty_like(T)
        return K.advect_rows_nb(T, out, shift_cells)
    ny, nx = T.shape
    out = np.zeros_like(T) if out is None else out
    out[:] = 0.0
    pad = np.zeros(nx + 4)
    for j in range(ny):
        s = shift_cells[j]
        m = int(np.floor(-s))
        t = -s - m  # in [0, 1)
        if t == 0.0:
            lo = max(0, -m)
            hi = min(nx, nx - m)
            if lo < hi:
                out[j, lo:hi] = T[j, lo + m:hi + m]
            continue
        pad[2:-2] = T[j]
        # departure node k = i + m, stencil k-1..k+2 sits at pad[i+m+1 : i+m+5]
        lo = max(0, -m - 1)
        hi = min(nx, nx - m)
        if lo >= hi:
            continue  # entire row shifted out of the domain
        pm1 = pad[lo + m + 1:hi + m + 1]
        p0 = pad[lo + m + 2:hi + m + 2]
        p1 = pad[lo + m + 3:hi + m + 3]
        p2 = pad[lo + m + 4:hi + m + 4]
        w_m1 = -t * (t - 1.0) * (t - 2.0) / 6.0
        w_0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
        w_1 = -(t + 1.0) * t * (t - 2.0) / 2.0
        w_2 = (t + 1.0) * t * (t - 1.0) / 6.0
        vals = w_m1 * pm1 + w_0 * p0 + w_1 * p1 + w_2 * p2
        np.clip(vals, np.minimum(p0, p1), np.maximum(p0, p1), out=vals)
        out[j, lo:hi] = vals
    return out


def react_step(T: np.ndarray, reaction, M: float, dt: float) -> np.ndarray:
    """Explicit midpoint step of T' = M f(T)."""
    if K.HAVE_NUMBA and getattr(reaction, "family", "") in ("quadratic-ignition",
                                                            "power-ignition"):
        q = reaction.params[0] if reaction.params else 1.0
        return K.react_power_rows(T, reaction.theta0, q, M, dt)
    f = reaction.f
    half = f(T)
    half *= 0.5 * dt * M
    half += T
    out = f(half)
    out *= dt * M
    T = T + out
    return T


def clamp_and_stats(T: np.ndarray, stats_rows: np.ndarray):
    """Clip to [0,1] in place; return (overshoot, sup, total_sum, boundary_max).

    Also flushes values below the tiny floor to exact zero (denormal guard).
    ``stats_rows`` is caller-owned scratch of shape (4, ny).
    """
    if K.HAVE_NUMBA:
        sums, sup, over, bnd = stats_rows
        K.clamp_stats_rows(T, sums, sup, over, bnd)
        return float(over.max()), float(sup.max()), float(sums.sum()), float(bnd.max())
    tmin = float(T.min())
    tmax = float(T.max())
    over = max(0.0, -tmin, tmax - 1.0)
    T[T < K.TINY_FLOOR] = 0.0
    if tmax > 1.0:
        np.clip(T, 0.0, 1.0, out=T)
        tmax = 1.0
    bmax = max(float(T[:, 0].max(initial=0.0)), float(T[:, -1].max(initial=0.0)))
    return over, tmax, float(T.sum()), bmax
