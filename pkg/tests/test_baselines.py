import numpy as np
import pytest
from hypothesis import given, strategies as st

from irsfp.baselines import SCHEMES, run_scheme
from irsfp.channel import Scenario, draw_instance
from irsfp.fp import SolverOptions, _initial_point, run_blocks
from irsfp.oracle import check_monotone

from conftest import small_instance


def test_scheme_names():
    assert SCHEMES == ("joint", "power_only", "phase_only")
    sc, _, eff = small_instance(0)
    with pytest.raises(ValueError):
        run_scheme("random", eff, sc)


def test_phase_only_keeps_full_power():
    sc, _, eff = small_instance(1, K=4)
    state, _, trace = run_scheme("phase_only", eff, sc, SolverOptions(seed=1))
    np.testing.assert_array_equal(state.p, sc.p_max)
    for rec in trace.records:
        np.testing.assert_array_equal(rec.p, sc.p_max)


def test_power_only_keeps_seeded_phases():
    sc, _, eff = small_instance(2, K=4)
    options = SolverOptions(seed=5)
    _, theta0 = _initial_point(sc, eff, options)
    state, _, _ = run_scheme("power_only", eff, sc, options)
    np.testing.assert_array_equal(state.theta, theta0)
    np.testing.assert_allclose(np.abs(theta0), 1.0, rtol=1e-15)


def test_power_only_single_user_uses_full_power():
    sc = Scenario(K=1, L=2, M=3, irs_positions=((100.0, 50.0), (200.0, -50.0)))
    _, _, eff = draw_instance(sc, 3)
    state, _, _ = run_scheme("power_only", eff, sc, SolverOptions(seed=0))
    assert state.p[0] == sc.p_max


@given(seed=st.integers(0, 2**31 - 1), scheme=st.sampled_from(SCHEMES))
def test_partial_updates_are_monotone(seed, scheme):
    sc, _, eff = small_instance(seed, K=4, L=2, M=2)
    _, report, trace = run_scheme(scheme, eff, sc, SolverOptions(seed=seed % 97, max_iter=100))
    assert check_monotone(trace)[0]
    assert report.sum_rate == pytest.approx(trace.sum_rates[-1], rel=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_joint_warm_started_from_baselines_dominates(seed):
    sc, _, eff = small_instance(seed, K=4, L=2, M=2)
    options = SolverOptions(seed=seed)
    for baseline in ("power_only", "phase_only"):
        state, report, _ = run_scheme(baseline, eff, sc, options)
        _, trace = run_blocks(eff, sc.p_max, sc.sigma_d2, state.p, state.theta, options)
        assert trace.sum_rates[-1] >= report.sum_rate - 1e-9


def test_schemes_share_the_realization_and_initial_phases():
    sc, _, eff = small_instance(3, K=3)
    options = SolverOptions(seed=4, max_iter=1)
    first = {s: run_scheme(s, eff, sc, options)[2].records[0] for s in SCHEMES}
    assert first["joint"].sum_rate == first["power_only"].sum_rate == first["phase_only"].sum_rate
