import dataclasses
import math

import numpy as np
import pytest
from scipy import stats

from hcnsim.topology import (BsKind, LayoutConfig, LayoutError, Position,
                             build_layout, sample_users)


def test_default_layout_counts():
    lay = build_layout(LayoutConfig())
    assert lay.n_bs == 50
    assert lay.counts == (1, 24, 16, 9)
    assert lay.kinds[0] == BsKind.MBS
    assert len(lay.ids_of(BsKind.CSBS)) == 24
    assert len(lay.ids_of(BsKind.RSBS)) == 16
    assert len(lay.ids_of(BsKind.HSBS)) == 9


def test_empty_tiers_leave_only_the_mbs():
    lay = build_layout(LayoutConfig(n_csbs=0, n_rsbs=0, n_hsbs=0))
    assert lay.n_bs == 1
    assert lay.kinds == (BsKind.MBS,)
    assert lay.positions[0] == Position(0.0, 0.0)


def test_all_sbs_positions_inside_macro_disc():
    lay = build_layout(LayoutConfig())
    for pos in lay.positions:
        assert pos.norm() <= lay.macro_radius_m + 1e-9


def test_layout_is_deterministic():
    a = build_layout(LayoutConfig())
    b = build_layout(LayoutConfig())
    assert a == b


def test_mbs_coverage_is_macro_radius_and_sbs_nominal():
    lay = build_layout(LayoutConfig())
    assert lay.coverage_radii_m[0] == 1730.0
    assert all(r == 350.0 for r in lay.coverage_radii_m[1:])


def test_min_separation_violation_names_the_pair():
    # 1 km macro cell squeezes the rings until neighbours collide
    with pytest.raises(LayoutError, match=r"BS \d+ .* and BS \d+ .* apart"):
        build_layout(LayoutConfig(macro_radius_m=400.0, min_separation_m=100.0))


def test_negative_count_rejected():
    with pytest.raises(LayoutError, match="n_rsbs"):
        build_layout(LayoutConfig(n_rsbs=-1))


def test_nonpositive_radius_rejected():
    with pytest.raises(LayoutError, match="macro_radius_m"):
        build_layout(LayoutConfig(macro_radius_m=0.0))


def test_position_rejects_non_finite():
    with pytest.raises(ValueError):
        Position(math.nan, 0.0)


def test_custom_counts_roundtrip():
    lay = build_layout(LayoutConfig(n_csbs=5, n_rsbs=3, n_hsbs=2))
    assert lay.counts == (1, 5, 3, 2)
    assert lay.n_bs == 11


def test_sample_users_zero_density_is_empty():
    rng = np.random.default_rng(0)
    users = sample_users(0.0, 1730.0, rng)
    assert users.shape == (0, 2)


def test_sample_users_negative_density_rejected():
    with pytest.raises(ValueError):
        sample_users(-1.0, 1730.0, np.random.default_rng(0))


def test_sample_users_mean_count_matches_density():
    rng = np.random.default_rng(42)
    counts = [len(sample_users(300.0, 1730.0, rng)) for _ in range(10_000)]
    assert abs(np.mean(counts) - 300.0) < 3.0  # within 1 %


def test_sample_users_stay_inside_disc():
    rng = np.random.default_rng(3)
    for _ in range(50):
        users = sample_users(200.0, 500.0, rng)
        if len(users):
            assert np.hypot(users[:, 0], users[:, 1]).max() <= 500.0


def test_sample_users_reproducible_per_seed():
    a = sample_users(120.0, 1730.0, np.random.default_rng(11))
    b = sample_users(120.0, 1730.0, np.random.default_rng(11))
    c = sample_users(120.0, 1730.0, np.random.default_rng(12))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_users_count_distribution_is_poisson():
    rng = np.random.default_rng(123)
    density = 5.0
    draws = np.array([len(sample_users(density, 100.0, rng)) for _ in range(4000)])
    kmax = 12
    observed = np.bincount(np.minimum(draws, kmax), minlength=kmax + 1)
    pmf = stats.poisson.pmf(np.arange(kmax), density)
    expected = np.append(pmf, 1.0 - pmf.sum()) * len(draws)
    _, p_value = stats.chisquare(observed, expected)
    assert p_value > 1e-3


def test_sample_users_positions_uniform_on_disc():
    # radial CDF of a uniform disc is (r/R)^2; compare quartiles
    rng = np.random.default_rng(9)
    users = np.concatenate([sample_users(500.0, 1000.0, rng) for _ in range(40)])
    r = np.hypot(users[:, 0], users[:, 1])
    inside_half = np.mean(r <= 1000.0 * math.sqrt(0.5))
    assert abs(inside_half - 0.5) < 0.02


def test_layout_xy_matches_positions():
    lay = build_layout(LayoutConfig())
    xy = lay.xy()
    assert xy.shape == (50, 2)
    assert xy[0, 0] == 0.0 and xy[0, 1] == 0.0
    for i, pos in enumerate(lay.positions):
        assert xy[i, 0] == pos.x and xy[i, 1] == pos.y
