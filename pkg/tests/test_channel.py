import math

import numpy as np
import pytest

from hcnsim.channel import (LinkGain, SIR_CAP, rate_matrix_bps, received_power,
                            sample_fading, sir, user_rate)


def test_received_power_unit_distance():
    assert received_power(30.0, LinkGain(3.5, 1.0, 1.0)) == pytest.approx(30.0, rel=1e-12)


def test_received_power_zero_tx():
    assert received_power(0.0, LinkGain(3.5, 1.0, 123.0)) == 0.0


def test_received_power_closed_form_at_100m():
    # 30 * 100^-3.5 = 3e-6 W
    got = received_power(30.0, LinkGain(3.5, 1.0, 100.0))
    assert got == pytest.approx(3.0e-6, rel=1e-12)


def test_received_power_zero_distance_is_singular():
    with pytest.raises(ValueError):
        received_power(30.0, LinkGain(3.5, 1.0, 0.0))


def test_received_power_negative_power_rejected():
    with pytest.raises(ValueError):
        received_power(-1.0, LinkGain())


def test_link_gain_validation():
    with pytest.raises(ValueError):
        LinkGain(path_loss_exponent=2.0)
    with pytest.raises(ValueError):
        LinkGain(fading=-0.1)


def _two_bs_state():
    bs_xy = np.array([[-100.0, 0.0], [100.0, 0.0]])
    p = np.array([30.0, 30.0])
    return bs_xy, p


def test_sir_symmetric_pair_is_one():
    bs_xy, p = _two_bs_state()
    value = sir(np.array([0.0, 0.0]), 0, np.array([0, 1]), bs_xy, p)
    assert value == pytest.approx(1.0, rel=1e-12)


def test_sir_without_interferers_hits_cap():
    bs_xy, p = _two_bs_state()
    value = sir(np.array([0.0, 50.0]), 0, np.array([0]), bs_xy, p)
    assert value == SIR_CAP


def test_sir_requires_active_server():
    bs_xy, p = _two_bs_state()
    with pytest.raises(ValueError):
        sir(np.array([0.0, 0.0]), 1, np.array([0]), bs_xy, p)


def test_sir_three_bs_matches_manual_summation():
    rng = np.random.default_rng(5)
    for _ in range(100):
        bs_xy = rng.uniform(-800, 800, size=(3, 2))
        p = rng.uniform(1.0, 40.0, size=3)
        user = rng.uniform(-800, 800, size=2)
        server = int(rng.integers(0, 3))
        got = sir(user, server, np.arange(3), bs_xy, p, alpha=3.5)
        rx = [p[i] * math.hypot(*(user - bs_xy[i])) ** -3.5 for i in range(3)]
        want = rx[server] / (sum(rx) - rx[server])
        assert got == pytest.approx(want, rel=1e-12)


def test_sir_invariant_under_common_power_scaling():
    rng = np.random.default_rng(8)
    bs_xy = rng.uniform(-500, 500, size=(4, 2))
    p = rng.uniform(1.0, 40.0, size=4)
    user = np.array([10.0, -20.0])
    base = sir(user, 2, np.arange(4), bs_xy, p)
    scaled = sir(user, 2, np.arange(4), bs_xy, 7.3 * p)
    assert scaled == pytest.approx(base, rel=1e-12)


def test_sir_never_drops_when_interferer_leaves():
    rng = np.random.default_rng(21)
    bs_xy = rng.uniform(-500, 500, size=(4, 2))
    p = rng.uniform(1.0, 40.0, size=4)
    user = np.array([40.0, 12.0])
    full = sir(user, 0, np.arange(4), bs_xy, p)
    reduced = sir(user, 0, np.array([0, 1, 2]), bs_xy, p)
    assert reduced >= full


def test_user_rate_trivials():
    assert user_rate(10_000.0, 0.0) == 0.0
    assert user_rate(10_000.0, 1.0) == pytest.approx(10_000.0, rel=1e-12)
    assert user_rate(10_000.0, 3.0) == pytest.approx(20_000.0, rel=1e-12)


def test_user_rate_monotone():
    assert user_rate(10_000.0, 5.0) > user_rate(10_000.0, 4.0)
    assert user_rate(20_000.0, 5.0) > user_rate(10_000.0, 5.0)


def test_user_rate_rejects_negative_args():
    with pytest.raises(ValueError):
        user_rate(-1.0, 1.0)
    with pytest.raises(ValueError):
        user_rate(1.0, -1.0)


def test_sample_fading_deterministic_mode_is_ones():
    rng = np.random.default_rng(0)
    h = sample_fading(rng, (3, 4), deterministic=True)
    assert np.array_equal(h, np.ones((3, 4)))


def test_sample_fading_unit_mean():
    rng = np.random.default_rng(1)
    h = sample_fading(rng, (200_000,))
    assert abs(h.mean() - 1.0) < 0.01


def test_rate_matrix_agrees_with_scalar_path():
    rng = np.random.default_rng(33)
    n_bs, n_users = 6, 15
    bs_xy = rng.uniform(-600, 600, size=(n_bs, 2))
    users = rng.uniform(-600, 600, size=(n_users, 2))
    p = rng.uniform(1.0, 40.0, size=n_bs)
    fading = rng.standard_exponential((n_bs, n_users))
    active = np.array([0, 2, 3, 5])
    servers = active[rng.integers(0, len(active), size=n_users)]
    dist = np.hypot(bs_xy[:, 0, None] - users[None, :, 0],
                    bs_xy[:, 1, None] - users[None, :, 1])
    rates = rate_matrix_bps(np.arange(n_users), servers, active, dist, p,
                            fading, 10_000.0, 3.5)
    for u in range(n_users):
        s = sir(users[u], int(servers[u]), active, bs_xy, p,
                fading=fading[:, u], alpha=3.5)
        assert rates[u] == pytest.approx(user_rate(10_000.0, s), rel=1e-9)
