"""Monte Carlo verification layer: Brownian paths, Feynman-Kac, martingales.

The linear comparison solution has the probabilistic form

    Psi(t, x, y) = P( x - (A / 2 kappa) * int_0^{2 kappa t} u(W_s^y) ds  in [-L, L] )

with W a standard Brownian motion started at y; the time change 2*kappa*t
and the prefactor A/(2 kappa) are kept in this one place.  Path integrals
of u feed the anti-concentration and plateau-occupancy probes; the
periodic antiderivatives v (of u) and z (of v) drive the Ito decomposition

    (1/a) int_0^{a^2} u(W_s) ds = (2/a)(z(W_{a^2}) - z(y)) - 2 M(y, a)

whose martingale part M = (1/a) int v dW tends to a centered normal with
variance (1/h) int v^2 as the scale a grows.

Randomness is counter-based: every Gaussian increment is a pure function
of (seed, path, step), so estimates are bitwise reproducible for a given
backend no matter how path batches are scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _rng
from ._kernels import HAVE_NUMBA
from .model import PhysParams
from .profiles import ShearProfile

if HAVE_NUMBA:
    from . import _sde_kernels as SK

__all__ = [
    "PathEnsembleConfig", "MCEstimate", "Antiderivatives",
    "build_antiderivatives", "estimate_psi_mc", "estimate_plateau_occupancy",
    "estimate_anticoncentration", "ito_residual", "sample_ito_residuals",
    "martingale_clt_sample", "MartingaleCLTReport", "displacement_bound",
    "sample_brownian_path",
]

_ANTIDER_GRID = 4096


@dataclass(frozen=True)
class PathEnsembleConfig:
    """Ensemble size, time step, and seed for Brownian-path estimators."""

    n_paths: int = 10_000
    dt: float = 1e-3
    seed: int = 2024
    scheme: str = "exact-increment"

    def __post_init__(self):
        if self.n_paths < 100:
            raise ValueError("n_paths must be >= 100")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.scheme != "exact-increment":
            raise ValueError("only the exact-increment scheme is implemented")


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n: int
    seed: int

    def agrees_with(self, value: float, sigmas: float = 3.0, extra_tol: float = 0.0) -> bool:
        return abs(self.mean - value) <= sigmas * (self.stderr + extra_tol)

    def to_json_fragment(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n, "seed": self.seed}


def _estimate(values: np.ndarray, seed: int) -> MCEstimate:
    n = len(values)
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return MCEstimate(mean=mean, stderr=stderr, n=n, seed=seed)


@dataclass(frozen=True)
class Antiderivatives:
    """Sampled periodic v (v' = u, mean zero) and z (z' = v, z(0) = 0); c = max|z|."""

    h: float
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    z: np.ndarray
    c: float

    def v_at(self, y):
        return _periodic_interp(y, self.v, self.h)

    def z_at(self, y):
        return _periodic_interp(y, self.z, self.h)


def _periodic_interp(y, samples, h):
    n = len(samples)
    pos = np.mod(np.asarray(y, dtype=float), h) * (n / h)
    i0 = np.floor(pos).astype(int) % n
    frac = pos - np.floor(pos)
    out = (1.0 - frac) * samples[i0] + frac * samples[(i0 + 1) % n]
    return out if out.ndim else float(out)


def _spectral_antiderivative(samples: np.ndarray, h: float) -> np.ndarray:
    """Mean-zero periodic antiderivative via Fourier division by ik."""
    n = len(samples)
    spec = np.fft.rfft(samples)
    k = 2.0 * np.pi / h * np.arange(len(spec))
    out = np.zeros_like(spec)
    out[1:] = spec[1:] / (1j * k[1:])
    return np.fft.irfft(out, n=n)


def build_antiderivatives(p: ShearProfile, n_grid: int = _ANTIDER_GRID) -> Antiderivatives:
    """v and z for a mean-zero profile; periodicity is exact by construction.

    Fourier antiderivatives are spectrally accurate for the smooth profile
    zoo and adequate for C^1 splices; the mean-zero check guards misuse.
    """
    y = np.linspace(0.0, p.h, n_grid, endpoint=False)
    u = np.asarray(p.u(y), dtype=float)
    mean = float(np.mean(u))
    scale = max(float(np.max(np.abs(u))), 1e-300)
    if abs(mean) > 1e-9 * scale:
        raise ValueError(f"profile must be mean-zero (mean={mean:.3e}); "
                         "normalize_mean_zero first")
    v = _spectral_antiderivative(u - mean, p.h)
    zz = _spectral_antiderivative(v, p.h)
    z = zz - zz[0]
    i = int(np.argmax(np.abs(z)))
    c = _refine_peak(np.abs(z), i, p.h / n_grid)
    return Antiderivatives(h=p.h, y=y, u=u, v=v, z=z, c=c)


def _refine_peak(vals: np.ndarray, i: int, dy: float) -> float:
    """Parabolic refinement of a grid maximum (periodic neighbors)."""
    n = len(vals)
    f0, f1, f2 = vals[(i - 1) % n], vals[i], vals[(i + 1) % n]
    denom = f0 - 2.0 * f1 + f2
    if denom >= 0.0:
        return float(f1)
    delta = 0.5 * (f0 - f2) / denom
    return float(f1 - 0.25 * (f0 - f2) * delta)


def displacement_bound(p: ShearProfile, A: float, t: float, kappa: float,
                       safety: float = 6.0) -> float:
    """High-probability bound on |A/(2 kappa) * int_0^{2 kappa t} u(W_s) ds|.

    Splits u into its mean (ballistic part) and the mean-zero remainder,
    bounded through the Ito identity by 2c plus ``safety`` standard
    deviations of the martingale part.  Used to size truncated domains for
    rapidly oscillating profiles, where the ballistic bound is far too
    pessimistic.
    """
    mean = p.mean
    shifted = p if abs(mean) < 1e-12 else p.with_shift(-mean)
    ad = build_antiderivatives(shifted)
    var_v = float(np.mean(ad.v**2))
    horizon = 2.0 * kappa * t
    fluct = (abs(A) / (2.0 * kappa)) * (4.0 * ad.c + safety * math.sqrt(var_v * horizon))
    return abs(A * mean) * t + fluct


def sample_brownian_path(y0: float, t_end: float, dt: float, seed: int,
                         path_index: int = 0) -> np.ndarray:
    """One standard Brownian path at resolution dt (counter-based increments)."""
    n = int(math.ceil(t_end / dt - 1e-12))
    xi = _rng.normals_block(seed, path_index, 1, 0, n)[0]
    W = np.empty(n + 1)
    W[0] = y0
    np.cumsum(xi * math.sqrt(dt), out=W[1:])
    W[1:] += y0
    return W


# ---------------------------------------------------------------------------
# path-integral estimators

_BATCH = 1024


def _u_table(p: ShearProfile):
    y = np.linspace(0.0, p.h, _ANTIDER_GRID, endpoint=False)
    return np.asarray(p.u(y), dtype=float), p.h


def _integrate_u_paths(p: ShearProfile, y0: float, horizon: float, cfg: PathEnsembleConfig):
    """int_0^horizon u(W_s) ds per path (trapezoid in time), W standard BM from y0."""
    n_steps = max(1, int(math.ceil(horizon / cfg.dt - 1e-12)))
    dt = horizon / n_steps
    table, h = _u_table(p)
    out = np.empty(cfg.n_paths)
    if HAVE_NUMBA:
        SK.integrate_u(out, table, h, y0, dt, n_steps, cfg.seed, cfg.n_paths)
        return out
    sqdt = math.sqrt(dt)
    for lo in range(0, cfg.n_paths, _BATCH):
        hi = min(cfg.n_paths, lo + _BATCH)
        W = np.full(hi - lo, y0)
        acc = np.zeros(hi - lo)
        u_prev = _periodic_interp(W, table, h)
        paths = np.arange(lo, hi, dtype=np.uint64)[:, None]
        for s0 in range(0, n_steps, 512):
            s1 = min(n_steps, s0 + 512)
            xi = _rng.normals(cfg.seed, paths, np.arange(s0, s1, dtype=np.uint64)[None, :])
            for k in range(s1 - s0):
                W = W + sqdt * xi[:, k]
                u_new = _periodic_interp(W, table, h)
                acc += 0.5 * (u_prev + u_new) * dt
                u_prev = u_new
        out[lo:hi] = acc
    return out


def estimate_psi_mc(t: float, x: float, y: float, A: float, L: float,
                    p: ShearProfile, params: PhysParams,
                    cfg: PathEnsembleConfig) -> MCEstimate:
    """Feynman-Kac probability for Psi(t, x, y) on the truncated event form.

    Horizon 2*kappa*t and prefactor A/(2*kappa) enter here and only here.
    """
    if not t > 0:
        raise ValueError("t must be > 0")
    horizon = 2.0 * params.kappa * t
    integ = _integrate_u_paths(p, y, horizon, cfg)
    drift = (A / (2.0 * params.kappa)) * integ
    inside = np.abs(x - drift) <= L
    return _estimate(inside.astype(float), cfg.seed)


def estimate_anticoncentration(t: float, y: float, a: float, eps: float,
                               p: ShearProfile, cfg: PathEnsembleConfig,
                               _cache: dict | None = None) -> MCEstimate:
    """P( int_0^t u(W_s^y) ds in [a, a+eps] ) by direct sampling."""
    if not t > 0:
        raise ValueError("t must be > 0")
    if eps < 0:
        raise ValueError("eps must be >= 0")
    key = (id(p), y, t, cfg)
    if _cache is not None and key in _cache:
        integ = _cache[key]
    else:
        integ = _integrate_u_paths(p, y, t, cfg)
        if _cache is not None:
            _cache[key] = integ
    inside = (integ >= a) & (integ <= a + eps)
    return _estimate(inside.astype(float), cfg.seed)


def estimate_plateau_occupancy(y0: float, interval: tuple, t: float,
                               cfg: PathEnsembleConfig) -> MCEstimate:
    """P(W_s^{y0} stays in the interval for all s <= t), bridge-corrected.

    Discrete monitoring alone overestimates survival; each step multiplies
    in the Brownian-bridge no-exit probability for both walls.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not t > 0:
        raise ValueError("t must be > 0")
    if not lo < hi:
        raise ValueError("interval must have positive length")
    if not lo < y0 < hi:
        return MCEstimate(mean=0.0, stderr=0.0, n=cfg.n_paths, seed=cfg.seed)
    n_steps = max(1, int(math.ceil(t / cfg.dt - 1e-12)))
    dt = t / n_steps
    out = np.empty(cfg.n_paths)
    if HAVE_NUMBA:
        SK.survival_weights(out, y0, lo, hi, dt, n_steps, cfg.seed, cfg.n_paths)
        return _estimate(out, cfg.seed)
    sqdt = math.sqrt(dt)
    for blo in range(0, cfg.n_paths, _BATCH):
        bhi = min(cfg.n_paths, blo + _BATCH)
        W = np.full(bhi - blo, y0)
        wgt = np.ones(bhi - blo)
        paths = np.arange(blo, bhi, dtype=np.uint64)[:, None]
        for s0 in range(0, n_steps, 512):
            s1 = min(n_steps, s0 + 512)
            xi = _rng.normals(cfg.seed, paths, np.arange(s0, s1, dtype=np.uint64)[None, :])
            for k in range(s1 - s0):
                Wn = W + sqdt * xi[:, k]
                dead = (Wn <= lo) | (Wn >= hi) | (wgt == 0.0)
                surv = (1.0 - np.exp(-2.0 * (W - lo) * (Wn - lo) / dt)) * \
                       (1.0 - np.exp(-2.0 * (hi - W) * (hi - Wn) / dt))
                wgt = np.where(dead, 0.0, wgt * surv)
                W = Wn
        out[blo:bhi] = wgt
    return _estimate(out, cfg.seed)


# ---------------------------------------------------------------------------
# Ito decomposition and the martingale CLT


def ito_residual(y: float, alpha: float, path: np.ndarray, antider: Antiderivatives,
                 dt: float) -> float:
    """Left side minus right side of the Ito identity on one discretized path.

    The time integral uses left-point Riemann sums and the stochastic
    integral the Ito (left-point) convention, both on the same increments.
    """
    W = np.asarray(path, dtype=float)
    u_vals = _periodic_interp(W[:-1], antider.u, antider.h)
    lhs = float(np.sum(u_vals) * dt) / alpha
    v_vals = _periodic_interp(W[:-1], antider.v, antider.h)
    mart = float(np.sum(v_vals * np.diff(W))) / alpha
    rhs = (2.0 / alpha) * (antider.z_at(W[-1]) - antider.z_at(y)) - 2.0 * mart
    return lhs - rhs


def sample_ito_residuals(y: float, alpha: float, p: ShearProfile,
                         cfg: PathEnsembleConfig) -> np.ndarray:
    """Residuals of the Ito identity across an ensemble (horizon alpha^2)."""
    ad = build_antiderivatives(p)
    horizon = alpha * alpha
    n_steps = max(1, int(math.ceil(horizon / cfg.dt - 1e-12)))
    dt = horizon / n_steps
    out = np.empty(cfg.n_paths)
    if HAVE_NUMBA:
        SK.ito_residuals(out, ad.u, ad.v, ad.z, ad.h, y, alpha, dt, n_steps,
                         cfg.seed, cfg.n_paths)
        return out
    for i in range(cfg.n_paths):
        W = sample_brownian_path(y, horizon, dt, cfg.seed, i)
        out[i] = ito_residual(y, alpha, W, ad, dt)
    return out


@dataclass
class MartingaleCLTReport:
    sigma2: float
    ks_distance: float | None
    n: int
    alpha: float
    degenerate: bool
    note: str = ""


def martingale_clt_sample(y: float, alpha: float, p: ShearProfile,
                          cfg: PathEnsembleConfig,
                          alpha_min: float = 8.0):
    """Samples of M(y, alpha, .) = (1/alpha) int_0^{alpha^2} v(W_s) dW_s plus KS report.

    sigma^2 is the flat average of v^2 over one period (independent
    quadrature, not the sample variance).  Degenerate profiles (v = 0)
    skip the KS test with an explicit note.
    """
    if alpha < alpha_min:
        raise ValueError(f"alpha={alpha} below alpha_min={alpha_min}")
    ad = build_antiderivatives(p)
    sigma2 = float(np.mean(ad.v**2))
    horizon = alpha * alpha
    n_steps = max(1, int(math.ceil(horizon / cfg.dt - 1e-12)))
    dt = horizon / n_steps
    samples = np.empty(cfg.n_paths)
    if HAVE_NUMBA:
        SK.martingale_samples(samples, ad.v, ad.h, y, alpha, dt, n_steps,
                              cfg.seed, cfg.n_paths)
    else:
        sqdt = math.sqrt(dt)
        for blo in range(0, cfg.n_paths, _BATCH):
            bhi = min(cfg.n_paths, blo + _BATCH)
            W = np.full(bhi - blo, y)
            acc = np.zeros(bhi - blo)
            paths = np.arange(blo, bhi, dtype=np.uint64)[:, None]
            for s0 in range(0, n_steps, 512):
                s1 = min(n_steps, s0 + 512)
                xi = _rng.normals(cfg.seed, paths,
                                  np.arange(s0, s1, dtype=np.uint64)[None, :])
                for k in range(s1 - s0):
                    dW = sqdt * xi[:, k]
                    acc += _periodic_interp(W, ad.v, ad.h) * dW
                    W = W + dW
            samples[blo:bhi] = acc / alpha
    if sigma2 <= 1e-300:
        return samples, MartingaleCLTReport(sigma2=sigma2, ks_distance=None,
                                            n=cfg.n_paths, alpha=alpha,
                                            degenerate=True,
                                            note="v vanishes identically; KS test skipped")
    from scipy.stats import kstest

    ks = float(kstest(samples, "norm", args=(0.0, math.sqrt(sigma2))).statistic)
    return samples, MartingaleCLTReport(sigma2=sigma2, ks_distance=ks,
                                        n=cfg.n_paths, alpha=alpha, degenerate=False)
