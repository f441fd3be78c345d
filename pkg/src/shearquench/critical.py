"""Critical plateau length from the stationary Dirichlet problem.

The symmetric stationary solution of kappa psi'' + M f(psi) = 0 vanishing at
the interval ends and peaking at p has length

    l(p) = sqrt(2 kappa / M) * J(p),    J(p) = int_0^p dpsi / sqrt(F(p) - F(psi)),

the classical time map.  l(p) diverges as p -> theta0 (dead zone) and as
p -> 1 (f(1) = 0); its minimum over p is the shortest interval carrying a
nonzero stationary solution.  Every quadrature here evaluates F-differences
by Gauss rules on the segment itself (never as a difference of two
antiderivative values), which kills the catastrophic cancellation next to
the peak.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import minimize_scalar

from .model import IgnitionReaction, PhysParams
from . import pde

__all__ = [
    "StationaryProfile", "QuenchTimeTable", "stationary_length",
    "stationary_profile", "critical_plateau_length", "bracket_ell",
    "quench_time", "quench_time_table", "F_diff",
]

# 12-point Gauss-Legendre nodes/weights on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def F_diff(reaction: IgnitionReaction, lo, hi):
    """F(hi) - F(lo) = integral of f over [lo, hi], cancellation-free.

    Splits at the ignition cutoff so the Gauss rule never straddles the kink.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    th = reaction.theta0
    a = np.maximum(lo, th)  # f vanishes below theta0
    b = np.maximum(hi, th)
    width = b - a
    x = a[..., None] + width[..., None] * _GL_X
    vals = reaction.f(x) @ _GL_W
    out = width * vals
    return out if out.ndim else float(out)


def stationary_length(p: float, reaction: IgnitionReaction, params: PhysParams) -> float:
    """Dirichlet interval length of the stationary solution with peak p.

    The substitution psi = p sin^2(s) removes the inverse-square-root
    endpoint singularity at the peak.
    """
    th = reaction.theta0
    if not th < p < 1.0:
        raise ValueError(f"peak must lie in (theta0, 1), got {p}")
    Fp = F_diff(reaction, 0.0, p)
    if Fp <= 0.0:
        raise ValueError(f"F(p) must be positive, got {Fp} at p={p}")

    def integrand(s):
        psi = p * math.sin(s) ** 2
        W = F_diff(reaction, psi, p)
        if W <= 0.0:
            # exact limit at the peak: W ~ f(p) p cos^2(s)
            fp = float(reaction.f(p))
            return 2.0 * math.sqrt(p / fp) * math.sin(s)
        return 2.0 * p * math.sin(s) * math.cos(s) / math.sqrt(W)

    s_kink = math.asin(math.sqrt(th / p))
    J, _ = quad(integrand, 0.0, 0.5 * math.pi, points=[s_kink],
                limit=200, epsabs=1e-10, epsrel=1e-10)
    return math.sqrt(2.0 * params.kappa / params.bigM) * J


@dataclass(frozen=True)
class StationaryProfile:
    """Symmetric stationary Dirichlet solution: psi(0) = psi(length) = 0, max = peak."""

    peak: float
    length: float
    y: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray

    def interpolate(self, y):
        return np.interp(y, self.y, self.psi, left=0.0, right=0.0)


def stationary_profile(p: float, reaction: IgnitionReaction, params: PhysParams,
                       n_samples: int = 513) -> StationaryProfile:
    """Stationary solution by shooting from the peak (independent of the time map).

    Integrates kappa psi'' = -M f(psi) outward from (psi, psi') = (p, 0) until
    psi crosses zero; the hit distance is half the interval length.
    """
    th = reaction.theta0
    if not th < p < 1.0:
        raise ValueError(f"peak must lie in (theta0, 1), got {p}")
    kappa, M = params.kappa, params.bigM

    def rhs(t, z):
        return [z[1], -(M / kappa) * float(reaction.f(z[0]))]

    def hit_zero(t, z):
        return z[0]

    hit_zero.terminal = True
    hit_zero.direction = -1
    span = 60.0 * params.laminar()
    sol = solve_ivp(rhs, (0.0, span), [p, 0.0], events=hit_zero,
                    dense_output=True, rtol=1e-11, atol=1e-13, max_step=span / 200)
    if sol.t_events[0].size == 0:
        raise RuntimeError(f"stationary shot from p={p} never reached zero")
    half = float(sol.t_events[0][0])
    m = (n_samples + 1) // 2
    s = np.linspace(0.0, half, m)
    vals, slopes = sol.sol(s)
    vals[-1] = 0.0
    psi = np.concatenate([vals[::-1], vals[1:]])
    dpsi = np.concatenate([-slopes[::-1], slopes[1:]])   # mirror flips the slope sign
    y = np.linspace(0.0, 2.0 * half, 2 * m - 1)
    return StationaryProfile(peak=p, length=2.0 * half, y=y,
                             psi=np.clip(psi, 0.0, 1.0), dpsi=dpsi)


def critical_plateau_length(reaction: IgnitionReaction, params: PhysParams,
                            n_scan: int = 64):
    """Minimize l(p) over the peak: returns (ell_tilde, p_star).

    Log-spaced scan of offsets from theta0 first (l may be non-convex for
    exotic reactions), then golden-section refinement around the scan winner.
    Returns (inf, nan) when no peak admits a finite length (degenerate f).
    """
    th = reaction.theta0
    offsets = np.logspace(math.log10(1e-3), math.log10(1.0 - th - 1e-3), n_scan)
    best = (math.inf, math.nan)
    lengths = []
    for off in offsets:
        try:
            l = stationary_length(th + off, reaction, params)
        except (ValueError, ZeroDivisionError):
            l = math.inf
        lengths.append(l)
        if l < best[0]:
            best = (l, th + off)
    if not math.isfinite(best[0]):
        return math.inf, math.nan
    i = int(np.argmin(lengths))
    lo = th + offsets[max(0, i - 1)]
    mid = th + offsets[i]
    hi = th + offsets[min(n_scan - 1, i + 1)]
    obj = lambda p: stationary_length(p, reaction, params)
    if lo < mid < hi and lengths[i] < lengths[i - 1] and lengths[i] < lengths[i + 1]:
        res = minimize_scalar(obj, bracket=(lo, mid, hi), method="golden",
                              options={"xtol": 1e-10})
    else:
        res = minimize_scalar(obj, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-8})
    p_star = float(res.x)
    return float(res.fun), p_star


def _strip_grid(l: float, L: float, params: PhysParams, t_max: float,
                ny: int = 48, dx_max: float | None = None,
                x_pad_sigma: float = 8.0) -> pde.Grid2D:
    lam = params.laminar()
    dx = dx_max if dx_max is not None else lam / 4.0
    X = L + x_pad_sigma * math.sqrt(params.kappa * t_max) + 2.0 * lam
    nx = max(8, int(math.ceil(2.0 * X / dx)))
    return pde.Grid2D(X=X, nx=nx, ny=ny, y_extent=l, bc_y="dirichlet")


def quench_time(l: float, L: float, reaction: IgnitionReaction, params: PhysParams,
                t_max: float | None = None, ny: int = 48,
                dx_max: float | None = None) -> float:
    """Minimal time for the worst strip data to fall below theta0/2, inf if not by t_max.

    The indicator data at level 1 dominates every admissible initial
    condition, so its quench time bounds them all (comparison principle).
    """
    if l <= 0 or L <= 0:
        raise ValueError("l and L must be positive")
    if t_max is None:
        t_max = 50.0 / params.bigM
    level = reaction.theta0 / 2.0
    grid = _strip_grid(l, L, params, t_max, ny=ny, dx_max=dx_max)
    num = pde.Numerics(cfl_diff=1.0, stop_below=level)
    traj = pde.solve_dirichlet_strip(l, L, params, reaction, grid, t_max, numerics=num)
    tau = traj.first_time_below(level)
    return math.inf if tau is None else tau


@dataclass
class QuenchTimeTable:
    l_values: list
    L_values: list
    tau: np.ndarray          # shape (len(l), len(L)), inf marks "not by horizon"
    horizon: float

    def rows(self):
        for i, l in enumerate(self.l_values):
            for j, L in enumerate(self.L_values):
                t = self.tau[i, j]
                yield (l, L, t, self.horizon, bool(math.isfinite(t)))


def quench_time_table(l_values, L_values, reaction, params,
                      t_max: float | None = None, **kw) -> QuenchTimeTable:
    if t_max is None:
        t_max = 50.0 / params.bigM
    tau = np.empty((len(l_values), len(L_values)))
    for i, l in enumerate(l_values):
        for j, L in enumerate(L_values):
            tau[i, j] = quench_time(l, L, reaction, params, t_max=t_max, **kw)
    return QuenchTimeTable(list(l_values), list(L_values), tau, t_max)


@dataclass
class EllBracket:
    l_low: float            # largest tested l with extinction
    l_high: float           # smallest tested l with persistence (inf if none persists)
    ell_tilde: float
    horizon: float
    evaluations: list       # (l, outcome) pairs, outcome in {"extinct", "persistent"}
    flags: dict


def bracket_ell(reaction: IgnitionReaction, params: PhysParams,
                L_probe: float | None = None, t_max: float | None = None,
                rel_tol: float = 0.02, ny: int = 48,
                dx_max: float | None = None, l_cap_factor: float = 30.0) -> EllBracket:
    """Bisection bracket for the critical strip width via Dirichlet evolutions.

    Extinction means sup phi <= theta0/2 before t_max; persistence is
    horizon-bounded (a run that stabilizes well above the threshold exits
    early and is flagged "stationary").  The lower seed starts below
    ell_tilde, which Dirichlet widths cannot beat.
    """
    ell_tilde, _ = critical_plateau_length(reaction, params)
    lam = params.laminar()
    seed = ell_tilde if math.isfinite(ell_tilde) else math.pi * lam
    if L_probe is None:
        L_probe = 4.0 * seed
    if t_max is None:
        t_max = 50.0 / params.bigM
    level = reaction.theta0 / 2.0
    evals = []
    flags = {"non_monotone": False, "horizon": t_max}

    def persists(l: float) -> bool:
        grid = _strip_grid(l, L_probe, params, t_max, ny=ny, dx_max=dx_max)
        num = pde.Numerics(cfl_diff=1.0, stop_below=level,
                           stop_above=None)
        traj = pde.solve_dirichlet_strip(l, L_probe, params, reaction, grid, t_max,
                                         numerics=num)
        alive = traj.supnorm[-1] > level
        evals.append((l, "persistent" if alive else "extinct"))
        return alive

    l_lo = 0.8 * seed
    while persists(l_lo):  # should be extinct; shrink defensively
        l_lo *= 0.7
        if l_lo < 1e-3 * lam:
            raise RuntimeError("persistence below any plausible critical width")
    l_hi = 1.6 * seed
    while not persists(l_hi):
        l_hi *= 1.6
        if l_hi > l_cap_factor * seed:
            return EllBracket(l_low=l_hi / 1.6, l_high=math.inf, ell_tilde=ell_tilde,
                              horizon=t_max, evaluations=evals, flags=flags)
    while l_hi - l_lo > rel_tol * l_hi:
        mid = 0.5 * (l_lo + l_hi)
        if persists(mid):
            l_hi = mid
        else:
            l_lo = mid
    order = sorted(evals, key=lambda e: e[0])
    seen_persist = False
    for _, outcome in order:
        if outcome == "persistent":
            seen_persist = True
        elif seen_persist:
            flags["non_monotone"] = True
    return EllBracket(l_low=l_lo, l_high=l_hi, ell_tilde=ell_tilde, horizon=t_max,
                      evaluations=evals, flags=flags)
