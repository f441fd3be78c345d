import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from shearquench.profiles import (longest_plateau, make_profile,
                                  normalize_mean_zero, profile_from_csv,
                                  profile_from_samples, scale_profile)


def test_sine_basics(sine):
    assert sine.mean == 0.0
    assert sine.u(math.pi / 2) == pytest.approx(1.0, abs=1e-15)
    assert longest_plateau(sine) == 0.0


def test_constant_profile_is_one_big_plateau():
    p = make_profile("constant", {"c": 0.3}, h=1.0)
    assert longest_plateau(p) == 1.0
    q = normalize_mean_zero(p)
    y = np.linspace(0, 1, 50)
    assert np.max(np.abs(q.u(y))) == 0.0


def test_normalize_is_idempotent_and_tight():
    p = make_profile("sine-with-plateau", {"plateau_len": 2.0}, h=2 * math.pi + 2.0)
    q = normalize_mean_zero(p)
    qq = normalize_mean_zero(q)
    assert q.mean == qq.mean == 0.0
    # quadrature check of the analytic mean bookkeeping (breakpoints at the splice)
    y0, P = q.plateaus[0]
    val, err = quad(lambda y: q.u(y), 0.0, q.h, points=[y0, y0 + P],
                    limit=400, epsabs=1e-13, epsrel=1e-13)
    assert abs(val) <= max(1e-12 * q.h * q.max_abs(), 2.0 * err)


def test_plateau_splice_is_c1():
    h = 2 * math.pi + 2.0
    p = make_profile("sine-with-plateau", {"plateau_len": 2.0}, h=h)
    assert longest_plateau(p) == 2.0
    y = np.linspace(0, h, 40001)
    u = p.u(y)
    du = np.diff(u) / np.diff(y)
    # derivative jumps would show as O(1) spikes in the second difference
    assert np.max(np.abs(np.diff(du))) < 5e-3
    assert np.max(np.abs(u)) <= 1.0 + 1e-12


def test_plateau_splice_off_crest_uses_blend():
    h = 2 * math.pi + 1.0
    p = make_profile("sine-with-plateau", {"plateau_len": 1.0, "position_frac": 0.1}, h=h)
    assert p.params["blend"] > 0.0
    y = np.linspace(0, h, 80001)
    du = np.diff(p.u(y)) / np.diff(y)
    assert np.max(np.abs(np.diff(du))) < 2e-2
    val, _ = quad(lambda t: p.u(t) - p.mean, 0.0, h, limit=400)
    assert abs(val) <= 1e-9 * h


def test_sampled_plateau_detection_within_one_cell():
    samp = np.sin(2 * np.pi * np.arange(512) / 512)
    samp[100:137] = samp[100]
    sp = profile_from_samples(samp, 1.0)
    detected = longest_plateau(sp)
    assert abs(detected - 37 / 512) <= 1 / 512


def test_sampled_plateau_free_profile_detects_zero():
    samp = np.sin(2 * np.pi * np.arange(256) / 256)
    sp = profile_from_samples(samp, 1.0)
    # any tol below (min nonzero slope) * one cell keeps runs at single samples
    min_step = np.min(np.abs(np.diff(samp)))
    assert longest_plateau(sp, tol=0.5 * min_step) == 0.0


def test_sampled_mean_removal():
    rng = np.random.default_rng(3)
    saw = np.linspace(-1, 1, 128) + 0.1
    sp = normalize_mean_zero(profile_from_samples(saw, 2.0))
    assert abs(np.mean(sp.u(np.arange(128) * 2.0 / 128))) <= 1e-12


def test_scale_profile_exact():
    sine = make_profile("sine")
    s2 = scale_profile(sine, 2.0)
    assert s2.h == pytest.approx(math.pi)
    y = np.linspace(0, math.pi, 64, endpoint=False)
    assert np.allclose(s2.u(y), np.sin(2 * y), atol=1e-14)
    p = make_profile("sine-with-plateau", {"plateau_len": 2.0}, h=2 * math.pi + 2.0)
    assert longest_plateau(scale_profile(p, 4.0)) == pytest.approx(0.5)
    # identity and exact plateau division
    assert scale_profile(p, 1.0).h == p.h
    for alpha in (0.5, 3.0, 7.5):
        assert longest_plateau(scale_profile(p, alpha)) == pytest.approx(
            longest_plateau(p) / alpha)
    with pytest.raises(ValueError, match="alpha"):
        scale_profile(p, 0.0)


def test_csv_round_trip(tmp_path):
    y = np.arange(64) / 64 * 3.0
    u = np.cos(2 * np.pi * y / 3.0) + 0.25
    path = tmp_path / "profile.csv"
    np.savetxt(path, np.column_stack([y, u]), delimiter=",")
    p = profile_from_csv(str(path))
    assert p.h == pytest.approx(3.0)
    assert np.allclose(p.u(y), u, atol=1e-12)
    bad = tmp_path / "bad.csv"
    np.savetxt(bad, np.column_stack([y[::-1], u]), delimiter=",")
    with pytest.raises(ValueError, match="uniformly spaced"):
        profile_from_csv(str(bad))


@settings(max_examples=20, deadline=None)
@given(offset=st.floats(-2.0, 2.0), h=st.floats(0.5, 20.0))
def test_normalization_property(offset, h):
    p = make_profile("constant", {"c": offset}, h=h)
    q = normalize_mean_zero(p)
    assert abs(q.mean) <= 1e-12
    assert normalize_mean_zero(q).shift == q.shift


def test_make_profile_errors():
    with pytest.raises(ValueError, match="plateau_len"):
        make_profile("sine-with-plateau", {})
    with pytest.raises(ValueError, match="unknown profile kind"):
        make_profile("vortex")
    with pytest.raises(ValueError, match="'c'"):
        make_profile("constant", {})
