import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from irsfp.channel import (
    DEFAULT_IRS_POSITIONS,
    ChannelRealization,
    Disk,
    Scenario,
    assemble_effective,
    cascade_per_irs,
    draw_instance,
    path_loss,
    pmax_from_snr,
    random_phases,
    reference_gain,
    sample_channels,
    sample_layout,
)

from conftest import small_instance


def test_path_loss_at_reference_distance():
    assert path_loss(1.0, 30.0, 1.0, 2.2) == pytest.approx(1e-3, rel=1e-15)
    for rho in (0.5, 2.2, 2.8, 4.0):
        assert path_loss(7.0, 30.0, 7.0, rho) == pytest.approx(1e-3, rel=1e-15)


def test_path_loss_at_100m_matches_high_precision():
    # frozen from mpmath at 50 digits: 10**-3 * 100**-2.2
    frozen = 3.9810717055349695e-08
    with mpmath.workdps(50):
        exact = mpmath.mpf(10) ** -3 * mpmath.mpf(100) ** mpmath.mpf("-2.2")
    assert float(exact) == pytest.approx(frozen, rel=1e-15)
    assert path_loss(100.0, 30.0, 1.0, 2.2) == pytest.approx(frozen, rel=1e-13)


@pytest.mark.parametrize("d, d0", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0)])
def test_path_loss_rejects_nonpositive(d, d0):
    with pytest.raises(ValueError):
        path_loss(d, 30.0, d0, 2.2)


def test_scenario_defaults():
    sc = Scenario()
    assert (sc.K, sc.L, sc.M, sc.N) == (6, 4, (4, 4, 4, 4), 16)
    assert sc.irs_positions == DEFAULT_IRS_POSITIONS
    assert sc.sigma_r2 == sc.sigma_d2 == 0.01
    assert sc.p_max == pytest.approx(pmax_from_snr(35.0, sc, "cascade"))


@pytest.mark.parametrize(
    "kw, name",
    [({"K": 0}, "K"), ({"L": 0}, "L"), ({"M": (4, 4, 0, 4)}, "M"), ({"M": (4, 4)}, "M"),
     ({"sigma_r2": 0.0}, "sigma_r2"), ({"sigma_d2": -1.0}, "sigma_d2"), ({"p_max": 0.0}, "p_max"),
     ({"d0": 0.0}, "d0")],
)
def test_scenario_validation_names_field(kw, name):
    with pytest.raises(ValueError, match=name):
        Scenario(**kw)


def test_transmit_snr_reference():
    sc = Scenario()
    # 0.01 * 10**3.5
    assert pmax_from_snr(35.0, sc, "transmit") == pytest.approx(31.6227766017, rel=1e-10)
    assert pmax_from_snr(35.0, sc, "cascade") == pytest.approx(31.6227766017 / reference_gain(sc), rel=1e-10)
    with pytest.raises(ValueError):
        pmax_from_snr(35.0, sc, "received")


def test_fixed_irs_positions_returned_verbatim():
    layout = sample_layout(Scenario(), seed=3)
    np.testing.assert_array_equal(layout.irs, np.array(DEFAULT_IRS_POSITIONS))


def test_degenerate_disks_put_everyone_at_the_center():
    sc = Scenario(source_region=Disk((0.0, 0.0), 0.0), dest_region=Disk((300.0, 0.0), 0.0))
    layout = sample_layout(sc, seed=0)
    np.testing.assert_array_equal(layout.sources, np.zeros((6, 2)))
    np.testing.assert_array_equal(layout.destinations, np.tile([300.0, 0.0], (6, 1)))


def test_uniform_disk_mean_radius():
    sc = Scenario(K=10_000)
    layout = sample_layout(sc, seed=1)
    r = np.linalg.norm(layout.sources, axis=1)
    assert r.max() <= 50.0
    assert r.mean() == pytest.approx(2 * 50 / 3, rel=0.02)


def test_random_irs_placement_stays_in_region():
    sc = Scenario(L=8, M=2, irs_positions=None)
    irs = sample_layout(sc, seed=5).irs
    assert irs.shape == (8, 2)
    assert np.all((irs[:, 0] >= 50) & (irs[:, 0] <= 250))
    assert np.all((irs[:, 1] >= -60) & (irs[:, 1] <= 60))


def test_channel_shapes():
    sc = Scenario()
    real = sample_channels(sc, sample_layout(sc, 0), seed=0)
    assert len(real.h) == len(real.g) == 4
    assert all(h.shape == (6, 4) for h in real.h)
    assert all(g.shape == (6, 4) for g in real.g)


def test_channels_are_deterministic():
    sc = Scenario()
    a = draw_instance(sc, 17, "realization")
    b = draw_instance(sc, 17, "realization")
    for x, y in zip(a[1].h + a[1].g, b[1].h + b[1].g):
        np.testing.assert_array_equal(x, y)
    np.testing.assert_array_equal(a[1].noise_draw, b[1].noise_draw)
    np.testing.assert_array_equal(a[2].v, b[2].v)
    np.testing.assert_array_equal(a[2].C, b[2].C)


def test_channel_variance_matches_path_loss():
    sc = Scenario(K=1, L=1, M=100_000, irs_positions=((100.0, 50.0),))
    layout = sample_layout(sc, 2)
    real = sample_channels(sc, layout, 2)
    d = np.linalg.norm(layout.sources[0] - layout.irs[0])
    kappa = path_loss(d, 30.0, 1.0, 2.2)
    h = real.h[0][0]
    assert np.mean(np.abs(h) ** 2) == pytest.approx(kappa, rel=0.03)
    # circular: real and imaginary parts share the power
    assert np.var(h.real) == pytest.approx(kappa / 2, rel=0.03)


def test_single_element_cascade():
    sc = Scenario(K=2, L=1, M=1, irs_positions=((150.0, 0.0),))
    _, real, eff = draw_instance(sc, 4)
    for i in range(2):
        for k in range(2):
            assert eff.v[i, k, 0] == pytest.approx(real.h[0][i, 0] * np.conj(real.g[0][k, 0]), rel=1e-15)


@given(seed=st.integers(0, 2**31 - 1), K=st.integers(1, 4), L=st.integers(1, 4), M=st.integers(1, 4))
def test_cascade_matches_per_irs_sum(seed, K, L, M):
    _, real, eff = small_instance(seed, K=K, L=L, M=M)
    rng = np.random.default_rng(seed)
    for _ in range(5):
        theta = random_phases(rng, eff.N)
        for i in range(K):
            for k in range(K):
                stacked = np.vdot(theta, eff.v[i, k])
                direct = cascade_per_irs(real, theta, i, k)
                assert abs(stacked - direct) <= 1e-10 * abs(stacked)


def test_expectation_noise_with_unit_gains():
    g = (np.ones((2, 3), dtype=complex),)
    h = (np.ones((2, 3), dtype=complex),)
    eff = assemble_effective(ChannelRealization(h, g, 0), "expectation", 0.01)
    for k in range(2):
        np.testing.assert_array_equal(eff.C[k], 0.01 * np.eye(3))


@given(seed=st.integers(0, 2**31 - 1))
def test_expectation_noise_quadratic_form(seed):
    _, real, eff = small_instance(seed)
    rng = np.random.default_rng(seed)
    theta = random_phases(rng, eff.N) * rng.random(eff.N)
    G = np.concatenate(real.g, axis=1)
    for k in range(eff.K):
        quad = np.vdot(theta, eff.C[k] @ theta).real
        assert quad == pytest.approx(0.01 * np.sum(np.abs(theta) ** 2 * np.abs(G[k]) ** 2), rel=1e-13)


def test_realization_noise_is_rank_one_hermitian():
    _, real, eff = small_instance(8, noise_mode="realization")
    for k in range(eff.K):
        C = eff.C[k]
        np.testing.assert_allclose(C, C.conj().T, rtol=0, atol=0)
        w = np.linalg.eigvalsh(C)
        assert w[:-1].max() <= 1e-12 * w[-1]
        assert w.min() >= -1e-12 * w[-1]


def test_realization_mode_needs_noise_draw():
    _, real, _ = small_instance(1)
    with pytest.raises(ValueError, match="noise_draw"):
        assemble_effective(real, "realization")
    with pytest.raises(ValueError):
        assemble_effective(real, "sampled")
