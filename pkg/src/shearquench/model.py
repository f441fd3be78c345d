"""Physical parameters, ignition reactions, and initial data.

The temperature equation lives on the periodic strip {x in R, y in [0, h]}:

    T_t + A u(y) T_x = kappa Lap(T) + M f(T),    0 <= T <= 1,

where f is an ignition nonlinearity: zero below the cutoff theta0,
nonnegative above it, f(0) = f(1) = 0, and f(T) <= T.  Everything in this
module is immutable after construction and safe to share between solver
instances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PhysParams",
    "IgnitionReaction",
    "InitialData",
    "build_reaction",
    "validate_reaction",
    "ReactionError",
]

_VALIDATION_GRID = 10_000  # grid used for Lipschitz estimate and build checks


class ReactionError(ValueError):
    """Raised when a reaction family is unknown or violates an ignition clause."""


@dataclass(frozen=True)
class PhysParams:
    """Thermal diffusivity, reaction strength, ignition cutoff, flow period."""

    kappa: float = 1.0
    bigM: float = 1.0
    theta0: float = 0.25
    h: float = 2.0 * math.pi

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if not self.bigM > 0:
            raise ValueError(f"bigM must be > 0, got {self.bigM}")
        if not 0.0 < self.theta0 < 1.0:
            raise ValueError(f"theta0 must lie in (0,1), got {self.theta0}")
        if not self.h > 0:
            raise ValueError(f"h must be > 0, got {self.h}")

    def laminar(self) -> float:
        """Intrinsic reaction-diffusion length sqrt(kappa/M)."""
        return math.sqrt(self.kappa / self.bigM)

    def to_json_fragment(self) -> dict:
        return {"kappa": self.kappa, "M": self.bigM, "theta0": self.theta0, "h": self.h}

    @classmethod
    def from_json_fragment(cls, obj: dict) -> "PhysParams":
        for key in ("kappa", "M", "theta0", "h"):
            if key not in obj:
                raise ValueError(f"missing required field '{key}'")
        return cls(kappa=float(obj["kappa"]), bigM=float(obj["M"]),
                   theta0=float(obj["theta0"]), h=float(obj["h"]))


@dataclass(frozen=True)
class IgnitionReaction:
    """Ignition nonlinearity f with cutoff theta0 and antiderivative F.

    ``f`` and ``bigF`` accept scalars or arrays.  ``lipschitz_d`` is the max
    finite-difference slope on a dense grid; it feeds quench-time estimates,
    never correctness.
    """

    theta0: float
    family: str
    params: tuple = ()
    lipschitz_d: float = field(default=0.0, compare=False)

    def f(self, T):
        raise NotImplementedError

    def bigF(self, T):
        """Antiderivative F(s) = integral_0^s f, with F(theta0) = 0."""
        raise NotImplementedError

    def to_json_fragment(self) -> dict:
        return {"family": self.family, "theta0": self.theta0, "params": list(self.params)}


@dataclass(frozen=True)
class _PowerIgnition(IgnitionReaction):
    """f(T) = max(0, T - theta0)^q (1 - T); q = 1 is the default quadratic family."""

    def f(self, T):
        T = np.asarray(T, dtype=float)
        q = self.params[0]
        s = np.maximum(0.0, T - self.theta0)
        if q == 1.0:
            out = s * (1.0 - T)
        else:
            out = s**q * (1.0 - T)
        return out if out.ndim else float(out)

    def bigF(self, T):
        # integral of s^q (1 - theta0 - s) ds from 0 to max(0, T - theta0)
        T = np.asarray(T, dtype=float)
        q = self.params[0]
        s = np.maximum(0.0, T - self.theta0)
        out = (1.0 - self.theta0) * s ** (q + 1) / (q + 1) - s ** (q + 2) / (q + 2)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class _ZeroReaction(IgnitionReaction):
    """f identically zero: the degenerate admissible limit, used for linear runs."""

    def f(self, T):
        out = np.zeros_like(np.asarray(T, dtype=float))
        return out if out.ndim else 0.0

    def bigF(self, T):
        out = np.zeros_like(np.asarray(T, dtype=float))
        return out if out.ndim else 0.0


@dataclass(frozen=True)
class _CallableReaction(IgnitionReaction):
    """Wraps a user callable; F is tabulated by cumulative Simpson and splined."""

    func: object = None
    _F_grid: object = field(default=None, compare=False, repr=False)

    def f(self, T):
        out = np.asarray(self.func(np.asarray(T, dtype=float)), dtype=float)
        return out if out.ndim else float(out)

    def bigF(self, T):
        Ts, Fs = self._F_grid
        out = np.interp(np.asarray(T, dtype=float), Ts, Fs)
        return out if out.ndim else float(out)


def _tabulate_antiderivative(func, n=20_001):
    from scipy.integrate import cumulative_trapezoid

    Ts = np.linspace(0.0, 1.0, n)
    Fs = np.concatenate([[0.0], cumulative_trapezoid(func(Ts), Ts)])
    return Ts, Fs


def build_reaction(family: str, theta0: float, params=()) -> IgnitionReaction:
    """Construct a reaction of the named family and validate the ignition clauses.

    Families:
      * ``quadratic-ignition``  -- f(T) = max(0, T - theta0)(1 - T)   (default)
      * ``power-ignition``      -- f(T) = max(0, T - theta0)^q (1 - T), params = (q,), q >= 1
      * ``zero``                -- f = 0, the degenerate limit for linear comparison runs
      * ``custom``              -- params = (callable,), antiderivative tabulated

    Raises ReactionError for an unknown family or any violated clause.
    """
    if not 0.0 < theta0 < 1.0:
        raise ReactionError(f"theta0 must lie in (0,1), got {theta0}")

    if family == "zero":
        reaction = _ZeroReaction(theta0=theta0, family=family, params=())
    elif family == "quadratic-ignition":
        reaction = _PowerIgnition(theta0=theta0, family=family, params=(1.0,))
    elif family == "power-ignition":
        if len(params) != 1 or not params[0] >= 1.0:
            raise ReactionError("power-ignition takes a single exponent q >= 1")
        reaction = _PowerIgnition(theta0=theta0, family=family, params=(float(params[0]),))
    elif family == "custom":
        if len(params) != 1 or not callable(params[0]):
            raise ReactionError("custom family takes a single callable")
        reaction = _CallableReaction(theta0=theta0, family=family, params=(),
                                     func=params[0],
                                     _F_grid=_tabulate_antiderivative(params[0]))
    else:
        raise ReactionError(f"unknown reaction family '{family}'")

    report = validate_reaction(reaction, _VALIDATION_GRID + 1)
    bad = {k: v for k, v in report.items() if v > 1e-12}
    if bad:
        worst = max(bad, key=bad.get)
        raise ReactionError(
            f"reaction family '{family}' violates clause '{worst}' "
            f"(max violation {bad[worst]:.3e}; all: {bad})")

    Ts = np.linspace(0.0, 1.0, _VALIDATION_GRID + 1)
    fs = reaction.f(Ts)
    lips = float(np.max(np.abs(np.diff(fs) / np.diff(Ts))))
    object.__setattr__(reaction, "lipschitz_d", lips)
    return reaction


def validate_reaction(reaction: IgnitionReaction, n_grid: int) -> dict:
    """Check the ignition clauses on a uniform grid of [0,1].

    Returns the max violation per clause (0.0 everywhere for a valid
    reaction).  Report-only: never raises.
    """
    if n_grid < 2:
        raise ValueError("n_grid must be >= 2")
    Ts = np.linspace(0.0, 1.0, n_grid)
    fs = np.asarray(reaction.f(Ts), dtype=float)
    th = reaction.theta0
    below = Ts <= th
    return {
        "f(0)=0": abs(float(reaction.f(0.0))),
        "f(1)=0": abs(float(reaction.f(1.0))),
        "f=0 on [0,theta0]": float(np.max(np.abs(fs[below]), initial=0.0)),
        "f>=0 on (theta0,1)": float(max(0.0, np.max(-fs[~below], initial=0.0))),
        "f<=T": float(max(0.0, np.max(fs - Ts))),
    }


@dataclass(frozen=True)
class InitialData:
    """Hot region of half-width L at level eta, sharp or ramped edges.

    sharp:   T0(x) = eta * indicator(|x| <= L)
    ramped:  cosine-squared ramp from eta down to 0 over [L, L + ramp_width]
    """

    L: float
    eta: float = 1.0
    shape: str = "sharp"
    ramp_width: float = 0.0

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be > 0, got {self.L}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0,1], got {self.eta}")
        if self.shape not in ("sharp", "ramped"):
            raise ValueError(f"shape must be 'sharp' or 'ramped', got {self.shape!r}")
        if self.shape == "ramped" and not self.ramp_width > 0:
            raise ValueError("ramped shape needs ramp_width > 0")

    def profile(self, x: np.ndarray) -> np.ndarray:
        """Evaluate T0 on x (values in [0, eta], zero beyond L + ramp width)."""
        x = np.abs(np.asarray(x, dtype=float))
        if self.shape == "sharp":
            return np.where(x <= self.L, self.eta, 0.0)
        core = x <= self.L
        ramp = (x > self.L) & (x < self.L + self.ramp_width)
        out = np.zeros_like(x)
        out[core] = self.eta
        out[ramp] = self.eta * np.cos(0.5 * np.pi * (x[ramp] - self.L) / self.ramp_width) ** 2
        return out

    def cell_averages(self, x: np.ndarray, dx: float) -> np.ndarray:
        """Cell-averaged T0 over [x - dx/2, x + dx/2]; mass-exact for sharp data."""
        x = np.asarray(x, dtype=float)
        if self.shape == "sharp":
            overlap = (np.minimum(x + 0.5 * dx, self.L) - np.maximum(x - 0.5 * dx, -self.L))
            return self.eta * np.clip(overlap / dx, 0.0, 1.0)
        # smooth ramp: midpoint sampling is already second order
        return self.profile(x)

    @property
    def support_halfwidth(self) -> float:
        return self.L + (self.ramp_width if self.shape == "ramped" else 0.0)
