"""Quench detection, critical amplitudes, maximal quenchable size, linearity fits.

The quench criterion is the sup-norm dropping to the ignition cutoff: once
sup T <= theta0 the reaction is dead everywhere and the maximum principle
sends T to zero, so detection on the recorded sup history suffices.  All
"not quenching" verdicts are horizon-bounded and every report carries the
horizon used.

Amplitude searches run the full nonlinear evolution as a predicate.  Two
domain-truncation safeguards apply:

  * a run whose x-boundary stays essentially cold is as good as the whole
    line;
  * a truncated run is a subsolution of the real problem (absorbing walls
    only lose heat), so survival on the box implies survival on the line.
    A quench verdict, however, is only trusted when nothing hotter than
    ``hot_boundary_fraction * theta0`` ever reached the boundary; otherwise
    the run restarts on a wider box.

Profiles with a plateau are evolved in the frame moving with the plateau
(a pure Galilean change that leaves quenching invariant); the persistent
blob then stays near the origin and the box can stay small even at the
amplitude cap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import pde
from .model import IgnitionReaction, InitialData, PhysParams
from .profiles import ShearProfile, longest_plateau, normalize_mean_zero

__all__ = [
    "QuenchOutcome", "CriticalAmplitude", "QuenchPolicy", "detect_quench",
    "run_quench_predicate", "critical_amplitude", "max_quenchable_L",
    "strong_quench_fit", "StrongQuenchFit",
]


@dataclass
class QuenchOutcome:
    quenched: bool
    tau_detect: float | None
    horizon: float
    decay_exponent: float | None = None
    flags: dict = field(default_factory=dict)


def detect_quench(traj: pde.Trajectory, theta0: float,
                  fit_decay: bool = False) -> QuenchOutcome:
    """Classify a trajectory: quenched iff some recorded sup-norm is <= theta0."""
    if len(traj.supnorm) == 0:
        raise ValueError("trajectory has no sup-norm history")
    tau = traj.first_time_below(theta0)
    horizon = float(traj.times[-1])
    out = QuenchOutcome(quenched=tau is not None, tau_detect=tau, horizon=horizon,
                        flags=dict(traj.flags))
    if fit_decay and tau is not None:
        out.decay_exponent = fit_decay_exponent(traj, tau)
    return out


def fit_decay_exponent(traj: pde.Trajectory, tau: float,
                       window: tuple = (1.0, 100.0)) -> float | None:
    """Log-log slope of sup-norm vs elapsed time over [tau+w0, tau+w1]."""
    t = traj.times
    s = traj.supnorm
    mask = (t >= tau + window[0]) & (t <= tau + window[1]) & (s > 0)
    if mask.sum() < 10:
        return None
    return float(np.polyfit(np.log(t[mask] - tau), np.log(s[mask]), 1)[0])


@dataclass(frozen=True)
class QuenchPolicy:
    """Grid, horizon, and early-exit rules for quench-predicate runs."""

    horizon: float = 50.0
    dx_max: float = 0.25            # in units of the laminar width
    ny_min: int = 32
    dy_reaction_frac: float = 0.26  # dy cap in laminar-width units
    dt_cap_fraction: float = 0.1    # dt <= fraction / M
    cfl: float = 1.0
    x_transit_time: float = 4.0     # X sized for |A| max|u| * min(horizon, this)
    x_pad_sigma: float = 8.0
    max_restarts: int = 2
    hot_boundary_fraction: float = 0.25   # of theta0: quench verdicts need colder walls
    early_exit: bool = True
    reignite_level: float = 0.95          # of initial sup
    reignite_dip: float = 0.8             # dip (of initial sup) required before a rebound exit
    reignite_tmin: float = 1.0
    mass_growth_factor: float = 2.0       # alternative exit: mass doubled after tmin
    plateau_rest_frame: bool = True
    tip_frame: bool = False   # rest frame of the profile crest; odd-symmetric profiles only
    nx_cap: int = 400_000

    def grid_for(self, params: PhysParams, profile: ShearProfile, A: float,
                 init: InitialData, attempt: int = 0) -> pde.Grid2D:
        """Box sized to hold the material that can decide the verdict.

        Plateau profiles run in the plateau rest frame, so the persistent
        blob needs no drift allowance on the first attempt; restarts widen
        ballistically.  Plateau-free profiles take the smaller of the
        ballistic bound and the stochastic displacement bound, which is what
        keeps rapidly oscillating flows affordable.
        """
        from .stochastic import displacement_bound

        lam = params.laminar()
        h = profile.h
        dy = min(h / self.ny_min, self.dy_reaction_frac * lam)
        ny = max(8, int(math.ceil(h / dy)))
        max_u = profile.max_abs()
        x_time = min(self.horizon, self.x_transit_time)
        ballistic = abs(A) * max_u * x_time * (2.0 ** attempt)
        static_blob = self.tip_frame or (bool(profile.plateaus) and self.plateau_rest_frame)
        if static_blob:
            drift = 0.0 if attempt == 0 else abs(A) * max_u * x_time * 2.0 ** (attempt - 1)
            drift = min(drift, ballistic)
        else:
            stoch = displacement_bound(profile, A, self.horizon, params.kappa) \
                * (2.0 ** attempt)
            drift = min(ballistic, stoch)
        X = (init.support_halfwidth + drift + min(2.0 * h, 8.0 * lam)
             + self.x_pad_sigma * math.sqrt(params.kappa * self.horizon) + 2.0 * lam)
        dx = self.dx_max * lam
        nx = max(8, int(math.ceil(2.0 * X / dx)))
        if nx > self.nx_cap:
            nx = self.nx_cap
            X = 0.5 * nx * dx
        return pde.Grid2D(X=X, nx=nx, ny=ny, y_extent=h, bc_y="periodic")

    def dt_for(self, grid: pde.Grid2D, params: PhysParams) -> float:
        caps = [self.dt_cap_fraction / params.bigM,
                self.cfl * grid.dx ** 2 / params.kappa,
                (grid.y_extent / 4.0) ** 2 / params.kappa]
        return min(caps)


def _rest_frame(profile: ShearProfile, policy: QuenchPolicy) -> ShearProfile:
    """Galilean change to the frame where the persistent material rests.

    Plateau profiles shift by the plateau velocity.  With ``tip_frame`` the
    shift is by the crest velocity instead: for a mean-zero profile that is
    odd-symmetric in y (the sine family), the crest and trough blobs have
    mirror-equal sup histories under reflection of (x, y), so tracking the
    resting crest alone gives the true sup-norm; the mirror blob sweeps out
    of the box once, early.
    """
    if policy.tip_frame:
        if profile.kind != "sine":
            raise ValueError("tip_frame requires an odd-symmetric profile (sine family)")
        yg = np.linspace(0.0, profile.h, 4096, endpoint=False)
        return profile.with_shift(-float(np.max(profile.u(yg))))
    if not policy.plateau_rest_frame or not profile.plateaus:
        return profile
    start, length = max(profile.plateaus, key=lambda p: p[1])
    return profile.with_shift(-float(profile.u(start + 0.5 * length)))


def run_quench_predicate(params: PhysParams, reaction: IgnitionReaction,
                         profile: ShearProfile, A: float, init: InitialData,
                         policy: QuenchPolicy) -> QuenchOutcome:
    """One horizon-bounded quench test of evolve_T, widening the box on demand.

    Early exits: a sup-norm at or below theta0 settles the verdict
    immediately; a rebound to ``reignite_level`` after a meaningful dip, or
    mass growth past ``mass_growth_factor``, settles survival.  Survival
    verdicts are safe on any box (subsolution); quench verdicts demand a
    cold boundary and otherwise trigger a restart on a wider box.
    """
    theta0 = reaction.theta0
    prof = _rest_frame(normalize_mean_zero(profile), policy)
    wall_allow = policy.hot_boundary_fraction * theta0
    # the exterior of the box never exceeds the wall trace (maximum principle,
    # no reaction below theta0), so box-sup <= theta0 - allowance plus cold-ish
    # walls certifies sup <= theta0 on the whole line
    verdict_level = theta0 - wall_allow
    attempts = 0
    while True:
        grid = policy.grid_for(params, prof, A, init, attempt=attempts)
        gate = 0.0
        rest_frame_run = policy.tip_frame or (bool(prof.plateaus) and policy.plateau_rest_frame)
        if rest_frame_run and A != 0.0:
            # material off the resting blob sweeps out by ~X / |A u| and is
            # doomed in the full problem anyway; walls that stay hot after
            # the transit indicate a genuine leak from the tracked blob
            gate = 1.2 * grid.X / (abs(A) * max(prof.max_abs(), 1e-300)) + 1.0 / params.bigM
        numerics = pde.Numerics(
            dt=policy.dt_for(grid, params),
            clip_threshold=wall_allow,
            stop_below=verdict_level if policy.early_exit else None,
            stop_above=policy.reignite_level * init.eta if policy.early_exit else None,
            stop_above_tmin=policy.reignite_tmin / params.bigM,
            stop_above_needs_dip=policy.reignite_dip * init.eta if policy.early_exit else None,
            stop_mass_factor=policy.mass_growth_factor if policy.early_exit else None,
            boundary_gate_time=gate,
        )
        traj = pde.evolve_T(params, reaction, prof, A, init, grid, policy.horizon,
                            numerics=numerics)
        tau = traj.first_time_below(theta0)
        flags = dict(traj.flags)
        relevant_boundary = (traj.flags["max_boundary_after_gate"] if gate > 0.0
                             else traj.flags["max_boundary_value"])
        flags["hot_wall"] = relevant_boundary > wall_allow
        flags["attempts"] = attempts + 1
        flags["grid"] = (grid.nx, grid.ny)
        flags["A"] = A
        quenched = traj.first_time_below(verdict_level) is not None
        out = QuenchOutcome(quenched=quenched, tau_detect=tau,
                            horizon=float(traj.times[-1]), flags=flags)
        if out.quenched and flags["hot_wall"] and attempts < policy.max_restarts:
            attempts += 1
            continue
        return out


@dataclass
class CriticalAmplitude:
    L: float
    A_low: float
    A_high: float
    iterations: int
    monotone_verified: bool | None
    horizon: float
    found: bool
    A_cap: float | None = None
    flags: dict = field(default_factory=dict)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.A_low + self.A_high)


def critical_amplitude(L: float, profile: ShearProfile, params: PhysParams,
                       reaction: IgnitionReaction, policy: QuenchPolicy = QuenchPolicy(),
                       rel_tol: float = 0.1, A_cap: float = 1e6,
                       A_seed: float | None = None, spot_check: bool = True,
                       warm_bracket: tuple | None = None) -> CriticalAmplitude:
    """Bracket the smallest quenching amplitude by doubling then bisection.

    Monotonicity of quenching in |A| is a working hypothesis, spot-checked
    at 2x and 4x the bracket top when ``spot_check`` is set.  Returns a
    failed search (found=False) once amplitudes reach ``A_cap`` without a
    quench, the expected outcome for supercritical plateaux.
    """
    init = InitialData(L=L)
    evals = {}

    def quenches(A: float) -> bool:
        if A not in evals:
            evals[A] = run_quench_predicate(params, reaction, profile, A, init, policy)
        return evals[A].quenched

    iterations = 0
    if quenches(0.0):
        return CriticalAmplitude(L=L, A_low=0.0, A_high=0.0, iterations=0,
                                 monotone_verified=None, horizon=policy.horizon,
                                 found=True, flags={"diffusion_only": True})

    if warm_bracket is not None:
        A_low, A_high = warm_bracket
        if not quenches(A_high):
            A_low = A_high
            A_high *= 2.0
        elif quenches(A_low):
            A_high = A_low
            A_low = 0.0
    else:
        A_low, A_high = 0.0, (A_seed if A_seed is not None else max(1.0, L * params.bigM / 4.0))
    while not quenches(A_high):
        iterations += 1
        A_low = A_high
        A_high *= 2.0
        if A_high > A_cap:
            return CriticalAmplitude(L=L, A_low=A_low, A_high=math.inf,
                                     iterations=iterations, monotone_verified=None,
                                     horizon=policy.horizon, found=False, A_cap=A_cap,
                                     flags={"no_quench_up_to_cap": True})
    while A_high - A_low > rel_tol * A_high:
        iterations += 1
        mid = 0.5 * (A_low + A_high)
        if quenches(mid):
            A_high = mid
        else:
            A_low = mid

    monotone = None
    if spot_check:
        monotone = quenches(2.0 * A_high) and quenches(4.0 * A_high)
    flags = {"bracket_outcomes": {a: e.quenched for a, e in evals.items()},
             "hot_wall_any": any(e.flags.get("hot_wall") for e in evals.values())}
    return CriticalAmplitude(L=L, A_low=A_low, A_high=A_high, iterations=iterations,
                             monotone_verified=monotone, horizon=policy.horizon,
                             found=True, flags=flags)


def max_quenchable_L(A: float, profile: ShearProfile, params: PhysParams,
                     reaction: IgnitionReaction, policy: QuenchPolicy = QuenchPolicy(),
                     rel_tol: float = 0.1, L_seed: float = 1.0,
                     L_cap: float = 1e4) -> tuple:
    """Largest initial half-width quenched at fixed amplitude: (L_low, L_high).

    L_low is the largest tested width that quenched, L_high the smallest
    that survived.  Works at A = 0 too, where it brackets the diffusion-only
    extinction scale.
    """
    evals = {}

    def quenches(L: float) -> bool:
        if L not in evals:
            evals[L] = run_quench_predicate(params, reaction, profile, A,
                                            InitialData(L=L), policy)
        return evals[L].quenched

    L_lo = L_seed
    while not quenches(L_lo):
        L_lo *= 0.5
        if L_lo < 1e-3 * params.laminar():
            raise RuntimeError(f"no quench even at L={L_lo}; check configuration")
    L_hi = max(2.0 * L_lo, L_seed)
    while quenches(L_hi):
        L_lo = L_hi
        L_hi *= 2.0
        if L_hi > L_cap:
            raise RuntimeError(f"quenching persists past L_cap={L_cap}")
    while L_hi - L_lo > rel_tol * L_hi:
        mid = 0.5 * (L_lo + L_hi)
        if quenches(mid):
            L_lo = mid
        else:
            L_hi = mid
    return L_lo, L_hi


@dataclass
class StrongQuenchFit:
    slope_through_origin: float   # least-squares C in A0 ~ C L
    max_ratio: float              # max A0 / L
    loglog_slope: float
    n_samples: int
    L_span: float


def strong_quench_fit(samples) -> StrongQuenchFit:
    """Fit A0 vs L through the origin and report the log-log growth exponent.

    Requires at least 4 samples spanning at least 8x in L.
    """
    pts = [(float(L), float(A0)) for L, A0 in samples]
    if len(pts) < 4:
        raise ValueError("need at least 4 (L, A0) samples")
    Ls = np.array([p[0] for p in pts])
    A0s = np.array([p[1] for p in pts])
    span = Ls.max() / Ls.min()
    if span < 8.0:
        raise ValueError(f"L values must span at least 8x, got {span:.2f}x")
    if np.any(~np.isfinite(A0s)):
        raise ValueError("A0 samples must be finite (quench bracket required)")
    C = float(np.sum(Ls * A0s) / np.sum(Ls * Ls))
    slope = float(np.polyfit(np.log(Ls), np.log(A0s), 1)[0])
    return StrongQuenchFit(slope_through_origin=C, max_ratio=float(np.max(A0s / Ls)),
                           loglog_slope=slope, n_samples=len(pts),
                           L_span=float(span))
