"""Experiment orchestration: configs, manifests, sweeps, and plot data.

A run is described by one JSON config; every run writes a manifest echoing
the fully resolved configuration (defaults expanded) so that any output CSV
can be regenerated from the manifest alone.  Output files are written
atomically (temp + rename) and numbers are formatted with repr-fidelity, so
identical configs give byte-identical CSVs; manifests differ only in their
timestamp field.

Exit codes: 0 success, 2 config error, 3 domain-clipped, 4 no bracket found.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import critical, pde, quench, stochastic
from .model import InitialData, PhysParams, ReactionError, build_reaction
from .profiles import (ShearProfile, make_profile, normalize_mean_zero,
                       profile_from_samples, scale_profile)

__all__ = [
    "ConfigError", "RunConfig", "load_config", "run", "alpha_sweep",
    "dichotomy_demo", "emit_plotdata", "SweepResult",
    "EXIT_OK", "EXIT_CONFIG", "EXIT_CLIPPED", "EXIT_NO_BRACKET",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CLIPPED = 3
EXIT_NO_BRACKET = 4

EXPERIMENTS = ("simulate", "critical-amplitude", "max-L", "critical-length",
               "mc-verify", "alpha-sweep", "dichotomy")


class ConfigError(ValueError):
    """Invalid or incomplete run configuration; message names the field."""


@dataclass
class RunConfig:
    """Fully resolved run description (defaults already expanded)."""

    experiment: str
    params: PhysParams
    reaction_spec: dict
    profile_spec: dict
    options: dict
    numerics: dict
    seed: int
    out_dir: str

    def reaction(self):
        return build_reaction(self.reaction_spec["family"], self.params.theta0,
                              tuple(self.reaction_spec.get("params", [])))

    def profile(self) -> ShearProfile:
        spec = self.profile_spec
        kind = spec["kind"]
        if kind == "sampled":
            p = profile_from_samples(np.asarray(spec["samples"], dtype=float),
                                     h=self.params.h,
                                     smoothness=spec.get("smoothness", "C0"))
        else:
            p = make_profile(kind, spec.get("params", {}), h=self.params.h)
        if spec.get("alpha", 1.0) != 1.0:
            p = scale_profile(p, float(spec["alpha"]))
        return normalize_mean_zero(p)

    def resolved(self) -> dict:
        out = {
            "experiment": self.experiment,
            "kappa": self.params.kappa, "M": self.params.bigM,
            "theta0": self.params.theta0, "h": self.params.h,
            "reaction": self.reaction_spec, "profile": self.profile_spec,
            "numerics": self.numerics, "seed": self.seed, "out": self.out_dir,
        }
        out.update(self.options)
        return out


def _require(cfg: dict, key: str, kind=None):
    if key not in cfg:
        raise ConfigError(f"missing required field '{key}'")
    val = cfg[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"field '{key}' has wrong type: expected {kind}, got {type(val)}")
    return val


_OPTION_DEFAULTS = {
    "simulate": {"A": 0.0, "L": 1.0, "t_end": 1.0, "record": None, "eta": 1.0,
                 "shape": "sharp", "ramp_width": 0.0},
    "critical-amplitude": {"L": 2.0, "horizon": 50.0, "rel_tol": 0.1, "cap": 1e6,
                           "A_seed": None, "tip_frame": False, "spot_check": True},
    "max-L": {"A": 10.0, "horizon": 50.0, "rel_tol": 0.1, "L_seed": 1.0,
              "tip_frame": False},
    "critical-length": {"L_probe": None, "t_max": None, "rel_tol": 0.02},
    "mc-verify": {"A": 4.0, "L": 2.0, "t_probe": 0.25, "n_paths": 10000,
                  "dt_mc": 1e-3, "probe_nx": 5, "probe_ny": 5, "fd_tol": 5e-3},
    "alpha-sweep": {"alphas": None, "mode": "A0-at-fixed-L", "L": 2.0, "A": 10.0,
                    "horizon": 20.0, "rel_tol": 0.1, "cap": 1e6,
                    "regimes": {}, "seed_coefficient": 3.0, "tip_frame": "auto",
                    "workers": 1},
    "dichotomy": {"plateau_factors": [0.5, 2.0], "L_quench": 4.0,
                  "L_persist_factor": 10.0, "horizon": 50.0, "rel_tol": 0.1,
                  "cap": 1e6},
}


def load_config(obj: dict | str) -> RunConfig:
    """Parse and validate a config mapping or JSON file path."""
    if isinstance(obj, str):
        with open(obj) as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError(f"config is not valid JSON: {e}") from e
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    experiment = _require(obj, "experiment", str)
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"field 'experiment' must be one of {EXPERIMENTS}, "
                          f"got '{experiment}'")
    for key in ("kappa", "M", "theta0", "h"):
        _require(obj, key, (int, float))
    try:
        params = PhysParams(kappa=float(obj["kappa"]), bigM=float(obj["M"]),
                            theta0=float(obj["theta0"]), h=float(obj["h"]))
    except ValueError as e:
        raise ConfigError(str(e)) from e
    reaction_spec = dict(obj.get("reaction", {"family": "quadratic-ignition", "params": []}))
    if "family" not in reaction_spec:
        raise ConfigError("missing required field 'reaction.family'")
    profile_spec = dict(obj.get("profile", {"kind": "sine"}))
    if "kind" not in profile_spec:
        raise ConfigError("missing required field 'profile.kind'")
    options = dict(_OPTION_DEFAULTS[experiment])
    for key in options:
        if key in obj:
            options[key] = obj[key]
    cfg = RunConfig(experiment=experiment, params=params,
                    reaction_spec=reaction_spec, profile_spec=profile_spec,
                    options=options, numerics=dict(obj.get("numerics", {})),
                    seed=int(obj.get("seed", 2024)),
                    out_dir=str(obj.get("out", "runs/out")))
    try:
        cfg.reaction()
        cfg.profile()
    except (ReactionError, ValueError) as e:
        raise ConfigError(str(e)) from e
    return cfg


# ---------------------------------------------------------------------------
# output helpers


def _atomic_write(path: str, text: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return repr(float(x))


def write_csv(path: str, header: list, rows: list):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _write_manifest(cfg: RunConfig, extra: dict):
    manifest = {"config": cfg.resolved(), "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
                "package": "shearquench 0.1.0"}
    manifest.update(extra)
    _atomic_write(os.path.join(cfg.out_dir, "manifest.json"),
                  json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _quench_policy(cfg: RunConfig, horizon: float, tip_frame: bool) -> quench.QuenchPolicy:
    kw = {k: v for k, v in cfg.numerics.items()
          if k in quench.QuenchPolicy.__dataclass_fields__}
    kw["horizon"] = horizon
    kw["tip_frame"] = tip_frame
    return quench.QuenchPolicy(**kw)


# ---------------------------------------------------------------------------
# experiments


def run(config) -> int:
    """Execute one configured experiment; returns the process exit code."""
    cfg = config if isinstance(config, RunConfig) else load_config(config)
    return _DISPATCH[cfg.experiment](cfg)


def _run_simulate(cfg: RunConfig) -> int:
    o = cfg.options
    reaction = cfg.reaction()
    profile = cfg.profile()
    init = InitialData(L=float(o["L"]), eta=float(o["eta"]), shape=o["shape"],
                       ramp_width=float(o["ramp_width"]))
    policy_kw = {k: v for k, v in cfg.numerics.items()
                 if k in pde.GridPolicy.__dataclass_fields__}
    grid = pde.design_grid(cfg.params, profile, float(o["A"]), init,
                           float(o["t_end"]), pde.GridPolicy(**policy_kw))
    num_kw = {k: v for k, v in cfg.numerics.items()
              if k in pde.Numerics.__dataclass_fields__}
    traj = pde.evolve_T(cfg.params, reaction, profile, float(o["A"]), init, grid,
                        float(o["t_end"]), record=o["record"],
                        numerics=pde.Numerics(**num_kw))
    rows = [(t, s, m) for t, s, m in zip(traj.times, traj.supnorm, traj.l1)]
    write_csv(os.path.join(cfg.out_dir, "history.csv"),
              ["t", "supnorm", "l1"], rows)
    for i, snap in enumerate(traj.snapshots):
        x = grid.x_nodes
        y = grid.y_nodes
        rows = [(snap.time, x[ix], y[iy], snap.values[ix, iy])
                for ix in range(grid.nx) for iy in range(grid.ny)]
        write_csv(os.path.join(cfg.out_dir, f"snapshot_{i:03d}.csv"),
                  ["t", "x", "y", "value"], rows)
    _write_manifest(cfg, {"flags": traj.flags, "grid": grid.to_json_fragment()})
    return EXIT_CLIPPED if traj.flags["domain_clipped"] else EXIT_OK


def _run_critical_amplitude(cfg: RunConfig) -> int:
    o = cfg.options
    policy = _quench_policy(cfg, float(o["horizon"]), bool(o["tip_frame"]))
    res = quench.critical_amplitude(float(o["L"]), cfg.profile(), cfg.params,
                                    cfg.reaction(), policy,
                                    rel_tol=float(o["rel_tol"]),
                                    A_cap=float(o["cap"]),
                                    A_seed=o["A_seed"],
                                    spot_check=bool(o["spot_check"]))
    write_csv(os.path.join(cfg.out_dir, "critical_amplitude.csv"),
              ["L", "A_low", "A_high", "horizon", "quenched_at_cap"],
              [(res.L, res.A_low, res.A_high, res.horizon, res.found)])
    _write_manifest(cfg, {"result": {"A_low": res.A_low, "A_high": res.A_high,
                                     "iterations": res.iterations,
                                     "monotone_verified": res.monotone_verified,
                                     "found": res.found, "flags": res.flags}})
    return EXIT_OK if res.found else EXIT_NO_BRACKET


def _run_max_L(cfg: RunConfig) -> int:
    o = cfg.options
    policy = _quench_policy(cfg, float(o["horizon"]), bool(o["tip_frame"]))
    L_lo, L_hi = quench.max_quenchable_L(float(o["A"]), cfg.profile(), cfg.params,
                                         cfg.reaction(), policy,
                                         rel_tol=float(o["rel_tol"]),
                                         L_seed=float(o["L_seed"]))
    write_csv(os.path.join(cfg.out_dir, "max_quenchable_L.csv"),
              ["A", "L_low", "L_high", "horizon"],
              [(float(o["A"]), L_lo, L_hi, policy.horizon)])
    _write_manifest(cfg, {"result": {"L_low": L_lo, "L_high": L_hi}})
    return EXIT_OK


def _run_critical_length(cfg: RunConfig) -> int:
    o = cfg.options
    reaction = cfg.reaction()
    ell, p_star = critical.critical_plateau_length(reaction, cfg.params)
    oracle = critical.stationary_profile(p_star, reaction, cfg.params).length \
        if math.isfinite(ell) else math.inf
    br = critical.bracket_ell(reaction, cfg.params, L_probe=o["L_probe"],
                              t_max=o["t_max"], rel_tol=float(o["rel_tol"]))
    report = {"ell_tilde": ell, "p_star": p_star,
              "quadrature_tolerance": 1e-10,
              "shooting_oracle_delta": abs(ell - oracle) if math.isfinite(ell) else None,
              "bracket": {"l_low": br.l_low, "l_high": br.l_high,
                          "horizon": br.horizon, "flags": br.flags}}
    _atomic_write(os.path.join(cfg.out_dir, "critical_length.json"),
                  json.dumps(report, indent=2, sort_keys=True) + "\n")
    write_csv(os.path.join(cfg.out_dir, "ell_bracket.csv"),
              ["l_low", "l_high", "ell_tilde", "horizon"],
              [(br.l_low, br.l_high, ell, br.horizon)])
    _write_manifest(cfg, {"result": report})
    return EXIT_OK


def _bilinear(grid: pde.Grid2D, vals: np.ndarray, xq: float, yq: float) -> float:
    xi = float(np.interp(xq, grid.x_nodes, np.arange(grid.nx)))
    i0 = min(int(xi), grid.nx - 1)
    fx = xi - i0
    i1 = min(i0 + 1, grid.nx - 1)
    yi = (yq % grid.y_extent) / grid.dy
    j0 = int(yi) % grid.ny
    fy = yi - math.floor(yi)
    j1 = (j0 + 1) % grid.ny
    return float((1 - fx) * (1 - fy) * vals[i0, j0] + fx * (1 - fy) * vals[i1, j0]
                 + (1 - fx) * fy * vals[i0, j1] + fx * fy * vals[i1, j1])


def _run_mc_verify(cfg: RunConfig) -> int:
    o = cfg.options
    profile = cfg.profile()
    params = cfg.params
    A, L, t_probe = float(o["A"]), float(o["L"]), float(o["t_probe"])
    init = InitialData(L=L)
    lam = params.laminar()
    X = L + abs(A) * profile.max_abs() * t_probe + 8.0 * math.sqrt(params.kappa * t_probe) + 2 * lam
    nx = int(math.ceil(2 * X / (lam / 20.0)))
    ny = max(32, int(math.ceil(profile.h / min(profile.h / 32, lam / 4))))
    grid = pde.Grid2D(X=X, nx=nx, ny=ny, y_extent=profile.h)
    traj = pde.evolve_Psi(params, profile, A, init, grid, t_probe, record=[t_probe],
                          numerics=pde.Numerics(dt=1e-3))
    vals = traj.snapshots[-1].values
    cfg_mc = stochastic.PathEnsembleConfig(n_paths=int(o["n_paths"]),
                                           dt=float(o["dt_mc"]), seed=cfg.seed)
    xs = np.linspace(-2 * L, 2 * L, int(o["probe_nx"]))
    ys = np.linspace(0.0, profile.h, int(o["probe_ny"]), endpoint=False)
    rows = []
    worst = 0.0
    for y in ys:
        for x in xs:
            est = stochastic.estimate_psi_mc(t_probe, float(x), float(y), A, L,
                                             profile, params, cfg_mc)
            fd = _bilinear(grid, vals, float(x), float(y))
            dev = abs(est.mean - fd) / (est.stderr + float(o["fd_tol"]))
            worst = max(worst, dev)
            rows.append((x, y, est.mean, est.stderr, fd, est.n, cfg_mc.seed, cfg_mc.dt))
    write_csv(os.path.join(cfg.out_dir, "mc_verify.csv"),
              ["x", "y", "mc_mean", "mc_stderr", "fd_value", "n", "seed", "dt"], rows)
    _write_manifest(cfg, {"result": {"max_deviation_sigmas": worst,
                                     "fd_tol": o["fd_tol"], "passed": worst <= 3.0}})
    return EXIT_OK


@dataclass
class SweepResult:
    mode: str
    rows: list                      # (alpha, lo, hi, horizon, found, flags)
    slopes: dict = field(default_factory=dict)

    def loglog_slope(self, alphas) -> dict:
        pts = [(a, 0.5 * (lo + hi)) for a, lo, hi, _, found, _ in self.rows
               if found and a in set(alphas)]
        if len(pts) < 2:
            return {"slope": math.nan, "ci95": math.nan, "n": len(pts)}
        x = np.log([p[0] for p in pts])
        y = np.log([p[1] for p in pts])
        n = len(pts)
        coef, cov = np.polyfit(x, y, 1, cov=True) if n > 2 else (np.polyfit(x, y, 1), None)
        slope = float(coef[0])
        if cov is None:
            return {"slope": slope, "ci95": math.inf, "n": n}
        from scipy.stats import t as tdist

        ci = float(tdist.ppf(0.975, n - 2) * math.sqrt(cov[0, 0])) if n > 2 else math.inf
        return {"slope": slope, "ci95": ci, "n": n}


def alpha_sweep(cfg: RunConfig) -> SweepResult:
    """Critical bracket per alpha with slope fits over the declared regimes.

    Rows are computed independently (a fixed seed-bracket formula per alpha,
    no state shared across points), so execution order cannot change values.
    """
    o = cfg.options
    alphas = o["alphas"]
    if not alphas:
        raise ConfigError("missing required field 'alphas'")
    mode = o["mode"]
    if mode not in ("A0-at-fixed-L", "LA-at-fixed-A"):
        raise ConfigError(f"field 'mode' must be 'A0-at-fixed-L' or 'LA-at-fixed-A', got {mode}")
    base_profile = cfg.profile()
    reaction = cfg.reaction()
    tip = o["tip_frame"]
    rows = []
    for alpha in alphas:
        prof = scale_profile(base_profile, float(alpha))
        tip_frame = (base_profile.kind == "sine") if tip == "auto" else bool(tip)
        policy = _quench_policy(cfg, float(o["horizon"]), tip_frame)
        if mode == "A0-at-fixed-L":
            L = float(o["L"])
            seed_A = float(o["seed_coefficient"]) * max(alpha, alpha**-2) * L
            res = quench.critical_amplitude(L, prof, cfg.params, reaction, policy,
                                            rel_tol=float(o["rel_tol"]),
                                            A_cap=float(o["cap"]), A_seed=seed_A,
                                            spot_check=False)
            rows.append((float(alpha), res.A_low, res.A_high, policy.horizon,
                         res.found, res.flags))
        else:
            lo, hi = quench.max_quenchable_L(float(o["A"]), prof, cfg.params,
                                             reaction, policy,
                                             rel_tol=float(o["rel_tol"]))
            rows.append((float(alpha), lo, hi, policy.horizon, True, {}))
    rows.sort(key=lambda r: r[0])
    result = SweepResult(mode=mode, rows=rows)
    for name, sub in (o["regimes"] or {}).items():
        result.slopes[name] = result.loglog_slope([float(a) for a in sub])
    return result


def _run_alpha_sweep(cfg: RunConfig) -> int:
    result = alpha_sweep(cfg)
    emit_plotdata({"alpha_sweep": result}, cfg.out_dir)
    _write_manifest(cfg, {"result": {"slopes": result.slopes}})
    ok = all(found for *_, found, _f in result.rows)
    return EXIT_OK if ok else EXIT_NO_BRACKET


def dichotomy_demo(cfg: RunConfig) -> dict:
    """Quench brackets across plateau lengths straddling the critical width."""
    o = cfg.options
    reaction = cfg.reaction()
    ell, _ = critical.critical_plateau_length(reaction, cfg.params)
    rows = []
    for factor in o["plateau_factors"]:
        P = float(factor) * ell
        prof = normalize_mean_zero(
            make_profile("sine-with-plateau", {"plateau_len": P}, h=cfg.params.h + P))
        L = float(o["L_quench"]) if factor < 1.0 else float(o["L_persist_factor"]) * ell
        policy = _quench_policy(cfg, float(o["horizon"]), False)
        res = quench.critical_amplitude(L, prof, cfg.params, reaction, policy,
                                        rel_tol=float(o["rel_tol"]),
                                        A_cap=float(o["cap"]), spot_check=False)
        expected = "bracket" if P < ell else "no-quench-at-cap"
        outcome = "bracket" if res.found else "no-quench-at-cap"
        rows.append({"plateau": P, "factor": float(factor), "L": L,
                     "outcome": outcome, "expected": expected,
                     "consistent": outcome == expected,
                     "A_low": res.A_low, "A_high": res.A_high,
                     "horizon": policy.horizon, "cap": float(o["cap"])})
    return {"ell_tilde": ell, "rows": rows}


def _run_dichotomy(cfg: RunConfig) -> int:
    report = dichotomy_demo(cfg)
    write_csv(os.path.join(cfg.out_dir, "dichotomy.csv"),
              ["plateau", "factor", "L", "outcome", "expected", "consistent",
               "A_low", "A_high", "horizon", "cap"],
              [(r["plateau"], r["factor"], r["L"], r["outcome"], r["expected"],
                r["consistent"], r["A_low"], r["A_high"], r["horizon"], r["cap"])
               for r in report["rows"]])
    _write_manifest(cfg, {"result": report})
    ok = all(r["consistent"] for r in report["rows"])
    return EXIT_OK if ok else EXIT_NO_BRACKET


def emit_plotdata(results: dict, out_dir: str):
    """Tidy, gnuplot-ready CSVs: one observation per row, headers documented.

    Accepts any of: 'alpha_sweep' (SweepResult), 'amplitude_vs_L' (list of
    (L, A_low, A_high)), 'supnorm_history' (Trajectory), 'ell_curve' (list of
    (p, l)).  Missing keys are skipped; empty collections give header-only
    files.
    """
    if "alpha_sweep" in results:
        sw = results["alpha_sweep"]
        write_csv(os.path.join(out_dir, "plot_alpha_sweep.csv"),
                  ["alpha", "A_low", "A_high"],
                  [(a, lo, hi) for a, lo, hi, *_ in sw.rows])
    if "amplitude_vs_L" in results:
        write_csv(os.path.join(out_dir, "plot_A0_vs_L.csv"),
                  ["L", "A_low", "A_high"],
                  [tuple(r) for r in results["amplitude_vs_L"]])
    if "supnorm_history" in results:
        traj = results["supnorm_history"]
        write_csv(os.path.join(out_dir, "plot_supnorm.csv"),
                  ["t", "supnorm"],
                  list(zip(traj.times, traj.supnorm)))
    if "ell_curve" in results:
        write_csv(os.path.join(out_dir, "plot_ell_curve.csv"),
                  ["p", "l"], [tuple(r) for r in results["ell_curve"]])


_DISPATCH = {
    "simulate": _run_simulate,
    "critical-amplitude": _run_critical_amplitude,
    "max-L": _run_max_L,
    "critical-length": _run_critical_length,
    "mc-verify": _run_mc_verify,
    "alpha-sweep": _run_alpha_sweep,
    "dichotomy": _run_dichotomy,
}
