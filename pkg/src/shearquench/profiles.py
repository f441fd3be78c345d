"""Periodic shear profiles u(y): construction, normalization, plateaux, scaling.

A plateau is a maximal interval on which u is constant.  Closed-form kinds
carry exact plateau metadata; sampled profiles get tolerance-based detection.
Profiles are immutable; normalization and scaling return new objects.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "ShearProfile",
    "make_profile",
    "normalize_mean_zero",
    "longest_plateau",
    "scale_profile",
    "profile_from_samples",
    "profile_from_csv",
]

DEFAULT_PLATEAU_TOL_FACTOR = 1e-9  # tol = factor * max|u| for sampled detection


@dataclass(frozen=True)
class ShearProfile:
    """Periodic velocity profile with plateau metadata.

    ``shift`` is a constant added to the raw profile (mean removal, Galilean
    frame changes).  ``alpha`` compresses the argument: u(y) = raw(alpha*y) + shift,
    period h = h_raw/alpha.
    """

    h: float
    kind: str
    params: dict
    smoothness: str = "C1"
    plateaus: tuple = ()          # ((start, length), ...) in current coordinates
    shift: float = 0.0
    alpha: float = 1.0
    samples: np.ndarray | None = None   # raw samples over one raw period, uniform, no endpoint dup
    raw_mean: float = 0.0               # exact mean of the raw profile

    def __call__(self, y):
        return self.u(y)

    def u(self, y):
        y = np.asarray(y, dtype=float)
        out = self._raw(self.alpha * y) + self.shift
        return out if out.ndim else float(out)

    def _raw(self, yr):
        """Raw profile at raw coordinate (period h*alpha)."""
        h0 = self.h * self.alpha
        yr = np.mod(yr, h0)
        k = self.kind
        if k == "sine":
            return np.sin(2.0 * np.pi * yr / h0)
        if k == "constant":
            return np.full_like(yr, float(self.params["c"]))
        if k == "sine-with-plateau":
            return _eval_sine_with_plateau(yr, h0, self.params)
        if k == "sampled":
            n = len(self.samples)
            pos = yr * (n / h0)
            i0 = np.floor(pos).astype(int) % n
            frac = pos - np.floor(pos)
            return (1.0 - frac) * self.samples[i0] + frac * self.samples[(i0 + 1) % n]
        raise ValueError(f"unknown profile kind '{k}'")

    @property
    def mean(self) -> float:
        return self.raw_mean + self.shift

    def max_abs(self, n_grid: int = 4096) -> float:
        yg = np.linspace(0.0, self.h, n_grid, endpoint=False)
        return float(np.max(np.abs(self.u(yg))))

    def with_shift(self, extra: float) -> "ShearProfile":
        """Add a constant (Galilean frame change; quenching is invariant)."""
        return replace(self, shift=self.shift + extra)

    def to_json_fragment(self) -> dict:
        out = {"kind": self.kind, "h": self.h, "params": dict(self.params),
               "shift": self.shift, "alpha": self.alpha}
        if self.plateaus:
            s, ln = max(self.plateaus, key=lambda p: p[1])
            out["plateau"] = {"length": ln, "position": s}
        return out


def _eval_sine_with_plateau(yr, h0, params):
    """Sine with a constant segment of length P spliced in at base phase.

    The base sine has period h0 - P.  At the default crest position the
    slopes already match and the splice is C^1 with no blending; elsewhere a
    cubic Hermite blend of width ``blend`` on each side restores C^1.
    """
    P = float(params["plateau_len"])
    hb = h0 - P
    y0 = float(params.get("position_frac", 0.25)) * hb  # base-phase of insertion
    w = float(params.get("blend", 0.0))

    def base(t):
        return np.sin(2.0 * np.pi * t / hb)

    def dbase(t):
        return (2.0 * np.pi / hb) * np.cos(2.0 * np.pi * t / hb)

    v0 = base(y0)
    out = np.empty_like(yr)
    # segments of the new period: [0, y0-w) base | blend | plateau [y0, y0+P] |
    # blend | (y0+P+w, h0) base shifted by P
    left = yr < y0 - w
    blin = (~left) & (yr < y0)
    plat = (yr >= y0) & (yr <= y0 + P)
    blout = (yr > y0 + P) & (yr < y0 + P + w)
    right = yr >= y0 + P + w
    out[left] = base(yr[left])
    out[plat] = v0
    out[right] = base(yr[right] - P)
    if w > 0.0:
        out[blin] = _hermite(yr[blin], y0 - w, y0, base(y0 - w), dbase(y0 - w), v0, 0.0)
        out[blout] = _hermite(yr[blout], y0 + P, y0 + P + w, v0, 0.0,
                              base(y0 + w), dbase(y0 + w))
    else:
        out[blin] = base(yr[blin])
        out[blout] = base(yr[blout] - P)
    return out


def _hermite(y, a, b, f0, d0, f1, d1):
    t = (y - a) / (b - a)
    h00 = (1 + 2 * t) * (1 - t) ** 2
    h10 = t * (1 - t) ** 2
    h01 = t * t * (3 - 2 * t)
    h11 = t * t * (t - 1)
    return h00 * f0 + h10 * (b - a) * d0 + h01 * f1 + h11 * (b - a) * d1


def _hermite_integral(a, b, f0, d0, f1, d1):
    # integral over [a,b] of the cubic Hermite above
    w = b - a
    return w * (0.5 * (f0 + f1) + w * (d0 - d1) / 12.0)


def make_profile(kind: str, params: dict | None = None, h: float = 2.0 * math.pi) -> ShearProfile:
    """Build a closed-form profile.

    kinds: ``sine`` (u = sin(2 pi y / h)), ``constant`` (params: c),
    ``sine-with-plateau`` (params: plateau_len, optional position_frac in (0,1)
    of the base period, optional blend width).
    """
    params = dict(params or {})
    if not h > 0:
        raise ValueError(f"h must be > 0, got {h}")
    if kind == "sine":
        return ShearProfile(h=h, kind=kind, params=params, smoothness="Cinf",
                            plateaus=(), raw_mean=0.0)
    if kind == "constant":
        if "c" not in params:
            raise ValueError("constant profile needs param 'c'")
        c = float(params["c"])
        return ShearProfile(h=h, kind=kind, params=params, smoothness="Cinf",
                            plateaus=((0.0, h),), raw_mean=c)
    if kind == "sine-with-plateau":
        if "plateau_len" not in params:
            raise ValueError("sine-with-plateau needs param 'plateau_len'")
        P = float(params["plateau_len"])
        if not 0.0 < P < h:
            raise ValueError(f"plateau_len must lie in (0, h), got {P}")
        hb = h - P
        pos = float(params.get("position_frac", 0.25))
        y0 = pos * hb
        if "blend" not in params:
            # crest and trough have matching slopes; elsewhere default to hb/50
            at_extremum = min(abs(pos - 0.25), abs(pos - 0.75)) < 1e-12
            params["blend"] = 0.0 if at_extremum else hb / 50.0
        w = float(params["blend"])
        if w > 0 and (y0 - w < 0 or y0 + P + w > h):
            raise ValueError("plateau plus blend windows must fit inside one period")

        v0 = math.sin(2.0 * math.pi * y0 / hb)
        mean = P * v0 / h  # base sine integrates to zero over its period
        if w > 0.0:
            db = (2.0 * math.pi / hb) * math.cos(2.0 * math.pi * (y0 + w) / hb)
            sin_int = lambda a, b: (hb / (2 * math.pi)) * (
                math.cos(2 * math.pi * a / hb) - math.cos(2 * math.pi * b / hb))
            mean += (_hermite_integral(y0 - w, y0, math.sin(2 * math.pi * (y0 - w) / hb),
                                       (2 * math.pi / hb) * math.cos(2 * math.pi * (y0 - w) / hb),
                                       v0, 0.0) - sin_int(y0 - w, y0)
                     + _hermite_integral(y0 + P, y0 + P + w, v0, 0.0,
                                         math.sin(2 * math.pi * (y0 + w) / hb), db)
                     - sin_int(y0, y0 + w)) / h
        return ShearProfile(h=h, kind=kind, params=params, smoothness="C1",
                            plateaus=((y0, P),), raw_mean=mean)
    raise ValueError(f"unknown profile kind '{kind}'")


def profile_from_samples(samples, h: float, smoothness: str = "C0") -> ShearProfile:
    """Sampled profile on a uniform grid over one period (no endpoint duplicate)."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1 or len(samples) < 4:
        raise ValueError("need a 1-D array of at least 4 samples")
    mean = float(np.mean(samples))  # rectangle rule == trapezoid for periodic data
    return ShearProfile(h=h, kind="sampled", params={}, smoothness=smoothness,
                        plateaus=(), samples=samples, raw_mean=mean)


def profile_from_csv(path, smoothness: str = "C0") -> ShearProfile:
    """Load a sampled profile from two-column CSV (y, u), uniform ascending y."""
    data = np.loadtxt(path, delimiter=",", comments="#")
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("expected two columns (y, u)")
    y, u = data[:, 0], data[:, 1]
    dy = np.diff(y)
    if not np.all(dy > 0) or np.max(np.abs(dy - dy[0])) > 1e-9 * dy[0] + 1e-15:
        raise ValueError("y column must be uniformly spaced and ascending")
    h = float(y[-1] - y[0] + dy[0])
    return profile_from_samples(u, h, smoothness=smoothness)


def normalize_mean_zero(p: ShearProfile) -> ShearProfile:
    """Remove the mean; idempotent.  Quenching is invariant under this shift."""
    return replace(p, shift=p.shift - p.mean)


def longest_plateau(p: ShearProfile, tol: float | None = None) -> float:
    """Length of the longest maximal constancy interval (0 if none).

    Closed-form kinds answer from exact metadata.  Sampled profiles use a
    sliding window with constancy criterion max-min <= tol (default
    1e-9 * max|u|); length is (run cells - 1) * dy.
    """
    if p.kind != "sampled":
        return max((ln for _, ln in p.plateaus), default=0.0)
    if tol is None:
        tol = DEFAULT_PLATEAU_TOL_FACTOR * max(np.max(np.abs(p.samples)), 1e-300)
    if tol <= 0:
        raise ValueError("tol must be > 0 for sampled profiles")
    vals = np.concatenate([p.samples, p.samples])  # periodic wrap
    n = len(p.samples)
    dy = p.h / n
    best = 1
    left = 0
    lo = hi = vals[0]
    for right in range(1, 2 * n):
        v = vals[right]
        lo, hi = min(lo, v), max(hi, v)
        while hi - lo > tol:
            left += 1
            seg = vals[left:right + 1]
            lo, hi = seg.min(), seg.max()
        best = max(best, min(right - left + 1, n))
    return 0.0 if best < 2 else (best - 1) * dy


def scale_profile(p: ShearProfile, alpha: float) -> ShearProfile:
    """Compress y by alpha: returns y -> u(alpha y), period h/alpha."""
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    return replace(
        p,
        h=p.h / alpha,
        alpha=p.alpha * alpha,
        plateaus=tuple((s / alpha, ln / alpha) for s, ln in p.plateaus),
    )
