import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shearquench.model import (InitialData, PhysParams, ReactionError,
                               build_reaction, validate_reaction)


def test_default_reaction_point_values(reaction):
    # cutoff boundary and forced zero at full burn
    assert reaction.f(0.25) == 0.0
    assert reaction.f(1.0) == 0.0
    # direct evaluation: (0.625 - 0.25) * (1 - 0.625) = 0.375 * 0.375
    assert reaction.f(0.625) == pytest.approx(0.140625, abs=1e-15)


def test_default_reaction_below_T_on_dense_grid(reaction):
    Ts = np.linspace(0.0, 1.0, 10_001)
    fs = reaction.f(Ts)
    assert np.all(fs <= Ts + 1e-15)
    assert np.all(fs >= 0.0)
    assert np.all(fs[Ts <= 0.25] == 0.0)


def test_validate_reaction_clean_report(reaction):
    report = validate_reaction(reaction, 1001)
    assert all(v == 0.0 for v in report.values())


def test_validate_reaction_flags_f_above_T():
    bad = build_reaction("custom", 0.25, (lambda T: np.zeros_like(T),))
    bad = bad.__class__(theta0=0.25, family="custom", params=(),
                        func=lambda T: 2.0 * np.asarray(T),
                        _F_grid=bad._F_grid)
    report = validate_reaction(bad, 101)
    assert report["f<=T"] > 0.9


def test_validate_reaction_flags_cutoff_violation():
    def f(T):
        T = np.asarray(T, dtype=float)
        base = np.maximum(0.0, T - 0.25) * (1 - T)
        return base + np.where(np.isclose(T, 0.125, atol=6e-3), 0.01, 0.0)

    from shearquench.model import _CallableReaction, _tabulate_antiderivative

    r = _CallableReaction(theta0=0.25, family="custom", params=(), func=f,
                          _F_grid=_tabulate_antiderivative(f))
    report = validate_reaction(r, 1001)
    assert report["f=0 on [0,theta0]"] == pytest.approx(0.01, rel=1e-9)


def test_build_rejects_bad_families():
    with pytest.raises(ReactionError, match="unknown reaction family"):
        build_reaction("arrhenius", 0.25)
    with pytest.raises(ReactionError, match="exponent"):
        build_reaction("power-ignition", 0.25, (0.5,))
    with pytest.raises(ReactionError, match="theta0"):
        build_reaction("quadratic-ignition", 1.5)
    with pytest.raises(ReactionError, match="f<=T"):
        build_reaction("custom", 0.25, (lambda T: 3.0 * np.asarray(T, dtype=float),))


@settings(max_examples=25, deadline=None)
@given(theta0=st.floats(0.05, 0.9), q=st.floats(1.0, 3.0))
def test_power_family_invariants(theta0, q):
    r = build_reaction("power-ignition", theta0, (q,))
    Ts = np.linspace(0.0, 1.0, 2001)
    fs = r.f(Ts)
    assert fs[0] == 0.0 and fs[-1] == 0.0
    assert np.all(fs >= 0.0) and np.all(fs <= Ts + 1e-12)
    assert np.all(fs[Ts <= theta0] == 0.0)
    # antiderivative: nondecreasing, zero through the cutoff, positive at 1
    Fs = r.bigF(Ts)
    assert np.all(np.diff(Fs) >= -1e-15)
    assert r.bigF(theta0) == 0.0
    assert r.bigF(1.0) > 0.0


def test_reaction_evaluation_is_pure(reaction):
    Ts = np.linspace(0, 1, 100)
    a = reaction.f(Ts)
    b = reaction.f(Ts)
    assert np.array_equal(a, b)
    assert reaction.lipschitz_d == pytest.approx(0.7499, abs=1e-4)


def test_zero_family_is_admissible():
    z = build_reaction("zero", 0.25)
    assert z.f(0.7) == 0.0 and z.bigF(1.0) == 0.0
    assert all(v == 0.0 for v in validate_reaction(z, 101).values())


def test_phys_params_validation_and_laminar():
    p = PhysParams(kappa=4.0, bigM=1.0)
    assert p.laminar() == 2.0
    with pytest.raises(ValueError, match="kappa"):
        PhysParams(kappa=-1.0)
    with pytest.raises(ValueError, match="theta0"):
        PhysParams(theta0=1.0)
    back = PhysParams.from_json_fragment(p.to_json_fragment())
    assert back == p
    with pytest.raises(ValueError, match="'M'"):
        PhysParams.from_json_fragment({"kappa": 1.0, "theta0": 0.2, "h": 1.0})


def test_initial_data_shapes():
    sharp = InitialData(L=2.0)
    x = np.linspace(-4, 4, 1001)
    vals = sharp.profile(x)
    assert np.all((vals == 0.0) | (vals == 1.0))
    assert np.all(vals[np.abs(x) <= 2.0] == 1.0)
    ramp = InitialData(L=2.0, eta=0.8, shape="ramped", ramp_width=0.5)
    v = ramp.profile(x)
    assert np.all(v[np.abs(x) >= 2.5] == 0.0)
    assert np.all(v[np.abs(x) <= 2.0] == 0.8)
    assert np.all((v >= 0) & (v <= 0.8))
    with pytest.raises(ValueError, match="ramp_width"):
        InitialData(L=1.0, shape="ramped")
    with pytest.raises(ValueError, match="eta"):
        InitialData(L=1.0, eta=0.0)


def test_initial_data_cell_averages_conserve_mass():
    init = InitialData(L=1.3)
    dx = 0.37
    x = np.arange(-20, 20) * dx + dx / 2
    avg = init.cell_averages(x, dx)
    assert np.sum(avg) * dx == pytest.approx(2 * 1.3, rel=1e-12)
    assert np.all((avg >= 0) & (avg <= 1))
