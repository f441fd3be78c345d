"""Deterministic solvers on the truncated strip.

Four evolutions share one split-step core:

  * evolve_T    : T_t   = kappa Lap(T)   - A u(y) T_x + M f(T)
  * evolve_Phi  : Phi_t = kappa Lap(Phi) - A u(y) Phi_x
  * evolve_Psi  : Psi_t = kappa Psi_yy   - A u(y) Psi_x       (no x-diffusion)
  * solve_dirichlet_strip / solve_1d_dirichlet : phi_t = kappa Lap(phi) + M f(phi)
                                                 with Dirichlet walls in y

The infinite x-line is truncated to [-X, X] with absorbing zero boundary.
Runs that push temperature above ``clip_threshold`` at the x-boundary are
flagged ``domain_clipped`` in the trajectory, never silently accepted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._stepper import XDiffusion, YDiffusion, advect_rows, clamp_and_stats, react_step
from .model import IgnitionReaction, InitialData, PhysParams
from .profiles import ShearProfile

__all__ = [
    "Grid2D", "Field2D", "Trajectory", "Trajectory1D", "Numerics", "GridPolicy",
    "evolve_T", "evolve_Phi", "evolve_Psi",
    "solve_dirichlet_strip", "solve_1d_dirichlet", "design_grid", "default_dt",
]


@dataclass(frozen=True)
class Grid2D:
    """Cell-centered x in [-X, X]; y periodic over h or interior Dirichlet nodes on [0, l]."""

    X: float
    nx: int
    ny: int
    y_extent: float
    bc_y: str = "periodic"
    bc_x: str = "absorbing-zero"

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ValueError("nx and ny must both be >= 8")
        if self.X <= 0 or self.y_extent <= 0:
            raise ValueError("X and y_extent must be positive")
        if self.bc_y not in ("periodic", "dirichlet"):
            raise ValueError(f"bc_y must be 'periodic' or 'dirichlet', got {self.bc_y!r}")
        if self.bc_x != "absorbing-zero":
            raise ValueError("only bc_x='absorbing-zero' is supported")

    @property
    def dx(self) -> float:
        return 2.0 * self.X / self.nx

    @property
    def dy(self) -> float:
        if self.bc_y == "periodic":
            return self.y_extent / self.ny
        return self.y_extent / (self.ny + 1)

    @property
    def x_nodes(self) -> np.ndarray:
        return -self.X + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y_nodes(self) -> np.ndarray:
        if self.bc_y == "periodic":
            return np.arange(self.ny) * self.dy
        return (np.arange(self.ny) + 1.0) * self.dy

    def to_json_fragment(self) -> dict:
        return {"X": self.X, "nx": self.nx, "ny": self.ny,
                "y_extent": self.y_extent, "bc_y": self.bc_y}


@dataclass
class Field2D:
    """Snapshot of a field; values indexed [x, y] (nx, ny)."""

    values: np.ndarray
    time: float


@dataclass
class Trajectory:
    """Per-step sup-norm and L1 traces plus requested snapshots."""

    times: np.ndarray
    supnorm: np.ndarray
    l1: np.ndarray
    snapshots: list
    grid: Grid2D
    flags: dict = field(default_factory=dict)

    @property
    def supnorm_history(self):
        return list(zip(self.times, self.supnorm))

    @property
    def l1_history(self):
        return list(zip(self.times, self.l1))

    def first_time_below(self, level: float):
        """Linear-interpolated first time the sup-norm reaches ``level`` (None if never)."""
        s = self.supnorm
        idx = np.nonzero(s <= level)[0]
        if len(idx) == 0:
            return None
        k = idx[0]
        if k == 0:
            return float(self.times[0])
        t0, t1 = self.times[k - 1], self.times[k]
        s0, s1 = s[k - 1], s[k]
        if s0 == s1:
            return float(t1)
        return float(t0 + (s0 - level) * (t1 - t0) / (s0 - s1))


@dataclass
class Trajectory1D:
    times: np.ndarray
    supnorm: np.ndarray
    snapshots: list
    y_nodes: np.ndarray
    flags: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Numerics:
    """Time step and run-control knobs; dt=None applies the default rule."""

    dt: float | None = None
    cfl_diff: float = 0.25          # dt <= cfl * min(dx,dy)^2 / kappa (when not relaxed)
    reaction_cap: float = 0.1       # dt <= reaction_cap / M
    relax_y: bool = False           # allow dt above the dy^2 rule (theta-blend keeps bounds)
    clip_threshold: float = 1e-8    # x-boundary contamination level for the clipped flag
    clamp_eps: float = 1e-10        # allowed pre-clamp overshoot
    record_every: int = 1
    stop_below: float | None = None     # early exit once sup <= this
    stop_above: float | None = None     # early exit once sup >= this and t >= stop_above_tmin
    stop_above_tmin: float = 0.0
    stop_above_needs_dip: float | None = None  # arm stop_above only after sup dipped below this
    stop_mass_factor: float | None = None      # early exit once mass >= factor * initial mass
    boundary_gate_time: float = 0.0            # boundary maxima tracked separately after this time


def default_dt(grid: Grid2D, params: PhysParams, numerics: Numerics,
               has_x_diffusion: bool = True) -> float:
    caps = [numerics.reaction_cap / params.bigM]
    dmin = grid.dy if not has_x_diffusion else min(grid.dx, grid.dy)
    if numerics.relax_y and has_x_diffusion:
        dmin = grid.dx
    caps.append(numerics.cfl_diff * dmin ** 2 / params.kappa)
    return min(caps)


@dataclass(frozen=True)
class GridPolicy:
    """Resolution and domain-sizing rules used to design a Grid2D for a run.

    Defaults follow the house rules: dy <= min(h, pi*sqrt(kappa/M))/32,
    dx <= L/64, X = L + |A| max|u| t_end + 8 sqrt(kappa t_end).  Experiment
    drivers pass coarser policies and rely on refinement self-checks.
    """

    dx_max: float | None = None
    dy_max: float | None = None
    x_extent: float | None = None
    x_padding_sigma: float = 8.0
    nx_cap: int = 2_000_000
    ny_cap: int = 100_000

    def resolve(self, params: PhysParams, profile: ShearProfile, A: float,
                init: InitialData, t_end: float) -> Grid2D:
        return design_grid(params, profile, A, init, t_end, self)


def design_grid(params: PhysParams, profile: ShearProfile, A: float,
                init: InitialData, t_end: float,
                policy: GridPolicy = GridPolicy()) -> Grid2D:
    h = profile.h
    lam = params.laminar()
    dy_max = policy.dy_max if policy.dy_max is not None else min(h, math.pi * lam) / 32.0
    dx_max = policy.dx_max if policy.dx_max is not None else init.L / 64.0
    if policy.x_extent is not None:
        X = policy.x_extent
    else:
        X = (init.support_halfwidth + abs(A) * profile.max_abs() * t_end
             + policy.x_padding_sigma * math.sqrt(params.kappa * t_end))
    ny = max(8, min(policy.ny_cap, int(math.ceil(h / dy_max))))
    nx = max(8, min(policy.nx_cap, int(math.ceil(2.0 * X / dx_max))))
    return Grid2D(X=X, nx=nx, ny=ny, y_extent=h, bc_y="periodic")


def _init_field(grid: Grid2D, init: InitialData) -> np.ndarray:
    row = init.cell_averages(grid.x_nodes, grid.dx)
    return np.tile(row, (grid.ny, 1))


def _record_requested(record, t_end):
    if record is None:
        return []
    times = sorted(float(t) for t in np.atleast_1d(record))
    return [t for t in times if t <= t_end * (1 + 1e-12)]


def _evolve_core(T, grid, params, dt, t_end, *, adv_shift_cells=None,
                 reaction=None, x_diff=True, y_diff=True,
                 numerics: Numerics, record=None) -> Trajectory:
    """Shared split-step loop; T is (ny, nx) and is consumed."""
    kappa, M = params.kappa, params.bigM
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-12)))
    dt = t_end / n_steps

    dx2 = grid.dx ** 2
    dy2 = grid.dy ** 2
    xop = XDiffusion(grid.nx, kappa * 0.5 * dt / dx2) if x_diff else None
    yop = YDiffusion(grid.ny, kappa * 0.5 * dt / dy2, grid.bc_y) if y_diff else None

    cell = grid.dx * grid.dy
    times = np.empty(n_steps + 1)
    sup = np.empty(n_steps + 1)
    l1 = np.empty(n_steps + 1)
    times[0] = 0.0
    sup[0] = float(T.max(initial=0.0))
    l1[0] = float(T.sum() * cell)

    wanted = _record_requested(record, t_end)
    snaps = []
    if wanted and wanted[0] <= 0.0:
        snaps.append(Field2D(values=T.T.copy(), time=0.0))
        wanted = [t for t in wanted if t > 0.0]

    flags = {"domain_clipped": False, "clip_time": None, "max_boundary_value": 0.0,
             "max_boundary_after_gate": 0.0, "max_overshoot": 0.0, "early_exit": None,
             "t_reached": 0.0, "dt": dt}

    stats_rows = np.empty((4, grid.ny))
    work = np.empty_like(T)
    adv_out = np.empty_like(T) if adv_shift_cells is not None else None
    t = 0.0
    k_done = 0
    sup_min = sup[0]
    for k in range(1, n_steps + 1):
        if x_diff:
            T = xop.apply(T, work)
        if y_diff:
            T = yop.apply(T, work)
        if adv_shift_cells is not None:
            adv_out = advect_rows(T, adv_shift_cells, adv_out)
            T, adv_out = adv_out, T
        if reaction is not None:
            T = react_step(T, reaction, M, dt)
        if y_diff:
            T = yop.apply(T, work)
        if x_diff:
            T = xop.apply(T, work)

        over, tmax, total, b = clamp_and_stats(T, stats_rows)
        if over > flags["max_overshoot"]:
            flags["max_overshoot"] = over

        t = k * dt
        times[k] = t
        sup[k] = tmax
        l1[k] = total * cell
        k_done = k

        if b > flags["max_boundary_value"]:
            flags["max_boundary_value"] = b
        if t >= numerics.boundary_gate_time and b > flags["max_boundary_after_gate"]:
            flags["max_boundary_after_gate"] = b
        if b > numerics.clip_threshold and not flags["domain_clipped"]:
            flags["domain_clipped"] = True
            flags["clip_time"] = t

        while wanted and t >= wanted[0] - 1e-12 * max(1.0, t_end):
            snaps.append(Field2D(values=T.T.copy(), time=t))
            wanted.pop(0)

        if tmax < sup_min:
            sup_min = tmax
        if numerics.stop_below is not None and tmax <= numerics.stop_below:
            flags["early_exit"] = "quenched"
            break
        if numerics.stop_above is not None and t >= numerics.stop_above_tmin:
            armed = (numerics.stop_above_needs_dip is None
                     or sup_min <= numerics.stop_above_needs_dip)
            if armed and tmax >= numerics.stop_above:
                flags["early_exit"] = "reignited"
                break
        if (numerics.stop_mass_factor is not None and t >= numerics.stop_above_tmin
                and l1[k] >= numerics.stop_mass_factor * l1[0] and l1[0] > 0.0):
            flags["early_exit"] = "mass-growth"
            break

    flags["t_reached"] = t
    return Trajectory(times=times[:k_done + 1], supnorm=sup[:k_done + 1],
                      l1=l1[:k_done + 1], snapshots=snaps, grid=grid, flags=flags)


def _shift_cells(profile, A, grid, dt):
    u_rows = profile.u(grid.y_nodes)
    return A * u_rows * dt / grid.dx


def evolve_T(params: PhysParams, reaction: IgnitionReaction, profile: ShearProfile,
             A: float, init: InitialData, grid: Grid2D, t_end: float,
             record=None, numerics: Numerics = Numerics()) -> Trajectory:
    """Nonlinear evolution with advection and ignition reaction."""
    if grid.bc_y != "periodic":
        raise ValueError("evolve_T runs on the periodic strip")
    dt = numerics.dt or default_dt(grid, params, numerics)
    T = _init_field(grid, init)
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-12)))
    shifts = _shift_cells(profile, A, grid, t_end / n_steps)
    return _evolve_core(T, grid, params, dt, t_end, adv_shift_cells=shifts,
                        reaction=reaction, x_diff=True, y_diff=True,
                        numerics=numerics, record=record)


def evolve_Phi(params: PhysParams, profile: ShearProfile, A: float,
               init: InitialData, grid: Grid2D, t_end: float,
               record=None, numerics: Numerics = Numerics()) -> Trajectory:
    """Linear comparison evolution: reaction dropped."""
    if grid.bc_y != "periodic":
        raise ValueError("evolve_Phi runs on the periodic strip")
    dt = numerics.dt or default_dt(grid, params, numerics)
    T = _init_field(grid, init)
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-12)))
    shifts = _shift_cells(profile, A, grid, t_end / n_steps)
    return _evolve_core(T, grid, params, dt, t_end, adv_shift_cells=shifts,
                        reaction=None, x_diff=True, y_diff=True,
                        numerics=numerics, record=record)


def evolve_Psi(params: PhysParams, profile: ShearProfile, A: float,
               init: InitialData, grid: Grid2D, t_end: float,
               record=None, numerics: Numerics = Numerics()) -> Trajectory:
    """Crosswise-diffusion comparison evolution: diffusion in y only."""
    if grid.bc_y != "periodic":
        raise ValueError("evolve_Psi runs on the periodic strip")
    dt = numerics.dt or default_dt(grid, params, numerics, has_x_diffusion=False)
    T = _init_field(grid, init)
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-12)))
    shifts = _shift_cells(profile, A, grid, t_end / n_steps)
    return _evolve_core(T, grid, params, dt, t_end, adv_shift_cells=shifts,
                        reaction=None, x_diff=False, y_diff=True,
                        numerics=numerics, record=record)


def solve_dirichlet_strip(l: float, L: float, params: PhysParams,
                          reaction: IgnitionReaction, grid: Grid2D, t_end: float,
                          record=None, numerics: Numerics = Numerics(),
                          init_values: np.ndarray | None = None) -> Trajectory:
    """phi_t = kappa Lap(phi) + M f(phi) on R x [0, l], Dirichlet walls at y = 0, l.

    Default initial data is the indicator of |x| <= L at level 1.  Pass
    ``init_values`` (nx, ny) to seed arbitrary data, e.g. a stationary profile.
    """
    if grid.bc_y != "dirichlet":
        raise ValueError("solve_dirichlet_strip needs a dirichlet grid")
    if abs(grid.y_extent - l) > 1e-12 * max(1.0, l):
        raise ValueError("grid.y_extent must equal l")
    dt = numerics.dt or default_dt(grid, params, numerics)
    if init_values is not None:
        T = np.ascontiguousarray(np.asarray(init_values, dtype=float).T)
        if T.shape != (grid.ny, grid.nx):
            raise ValueError("init_values must be (nx, ny)")
    else:
        T = _init_field(grid, InitialData(L=L))
    return _evolve_core(T, grid, params, dt, t_end, adv_shift_cells=None,
                        reaction=reaction, x_diff=True, y_diff=True,
                        numerics=numerics, record=record)


def solve_1d_dirichlet(l: float, params: PhysParams, reaction: IgnitionReaction,
                       init_1d, t_end: float, ny: int = 128,
                       record=None, numerics: Numerics = Numerics()) -> Trajectory1D:
    """psi_t = kappa psi_yy + M f(psi) on [0, l], Dirichlet ends.

    ``init_1d`` is a callable psi0(y) or an array on the interior nodes.
    """
    grid = Grid2D(X=1.0, nx=8, ny=ny, y_extent=l, bc_y="dirichlet")
    y = grid.y_nodes
    if callable(init_1d):
        psi0 = np.asarray(init_1d(y), dtype=float)
    else:
        psi0 = np.asarray(init_1d, dtype=float)
    if psi0.shape != (ny,):
        raise ValueError("init_1d must give one value per interior node")
    if psi0.min() < 0.0 or psi0.max() > 1.0:
        raise ValueError("initial values must lie in [0, 1]")
    dt = numerics.dt or min(numerics.reaction_cap / params.bigM,
                            numerics.cfl_diff * grid.dy ** 2 / params.kappa)
    fake = replace(grid, nx=8)  # column field: reuse the 2-D core with x inert
    T = np.tile(psi0[:, None], (1, fake.nx))
    traj = _evolve_core(T, fake, params, dt, t_end, adv_shift_cells=None,
                        reaction=reaction, x_diff=False, y_diff=True,
                        numerics=numerics, record=record)
    snaps = [Field2D(values=s.values[0].copy(), time=s.time) for s in traj.snapshots]
    return Trajectory1D(times=traj.times, supnorm=traj.supnorm, snapshots=snaps,
                        y_nodes=y, flags=traj.flags)
