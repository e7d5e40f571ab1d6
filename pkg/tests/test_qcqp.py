import numpy as np
import pytest
from hypothesis import given, strategies as st

from irsfp.fp import update_beta, update_mu
from irsfp.qcqp import (
    ThetaSubproblem,
    build_subproblem,
    default_ellipsoid_cap,
    dual_value,
    kkt_residual,
    lagrangian,
    solve_dual,
    theta_of_lambda,
)
from irsfp.rates import eval_g2

from conftest import random_point, small_instance

seeds = st.integers(0, 2**31 - 1)
LN2 = np.log(2.0)


def random_psd(rng, N, rank=None):
    rank = N if rank is None else rank
    X = rng.standard_normal((N, rank)) + 1j * rng.standard_normal((N, rank))
    return X @ X.conj().T / rank


def random_sub(rng, N, rank=None, scale=3.0):
    u = scale * (rng.standard_normal(N) + 1j * rng.standard_normal(N))
    return ThetaSubproblem(random_psd(rng, N, rank), u)


def instance_sub(seed, K=3, L=2, M=2):
    sc, _, eff = small_instance(seed, K=K, L=L, M=M)
    rng = np.random.default_rng(seed)
    p, theta = random_point(rng, sc, eff)
    mu = update_mu(p, theta, eff, 0.01)
    beta = update_beta(theta, p, mu, eff, 0.01)
    return sc, eff, p, mu, beta, build_subproblem(p, mu, beta, eff, 0.01)


def test_zero_beta_gives_empty_subproblem():
    sc, _, eff = small_instance(0)
    sub = build_subproblem(np.ones(eff.K), np.ones(eff.K), np.zeros(eff.K, complex), eff, 0.01)
    assert not sub.A.any() and not sub.u.any()


def test_single_term_subproblem():
    sc, _, eff = small_instance(1, K=1, L=1, M=3)
    eff = type(eff)(eff.v, np.zeros_like(eff.C))
    beta = np.array([0.7 - 0.2j])
    sub = build_subproblem(np.ones(1), np.zeros(1), beta, eff, 0.01)
    v = eff.v[0, 0]
    np.testing.assert_allclose(sub.A, abs(beta[0]) ** 2 * np.outer(v, v.conj()), rtol=1e-14)
    np.testing.assert_allclose(sub.u, np.sqrt(2) * np.conj(beta[0]) * v, rtol=1e-14)


@given(seed=seeds, mode=st.sampled_from(["expectation", "realization"]))
def test_subproblem_reproduces_g2(seed, mode):
    sc, _, eff = small_instance(seed, noise_mode=mode)
    rng = np.random.default_rng(seed)
    p, theta = random_point(rng, sc, eff)
    mu = rng.exponential(2.0, eff.K)
    beta = update_beta(theta, p, mu, eff, 0.01)
    sub = build_subproblem(p, mu, beta, eff, 0.01)
    np.testing.assert_allclose(sub.A, sub.A.conj().T, atol=1e-13 * np.abs(sub.A).max())
    assert np.linalg.eigvalsh(sub.A).min() >= -1e-10 * np.trace(sub.A).real / eff.N
    for _ in range(100):
        t = np.exp(2j * np.pi * rng.random(eff.N)) * rng.random(eff.N)
        g2 = eval_g2(t, beta, p, mu, eff, 0.01)
        assert sub.objective(t) == pytest.approx(LN2 * g2, rel=1e-9, abs=1e-12 * sub.offset)


def test_identity_solve():
    sub = ThetaSubproblem(np.eye(4, dtype=complex), 2 * np.ones(4, complex))
    np.testing.assert_allclose(theta_of_lambda(np.zeros(4), sub), np.ones(4), rtol=1e-15)


def test_large_multipliers_shrink_theta(rng):
    sub = random_sub(rng, 5)
    norms = [np.linalg.norm(theta_of_lambda(np.full(5, lam), sub)) for lam in np.geomspace(1e-2, 1e6, 30)]
    assert np.all(np.diff(norms) < 0)
    assert norms[-1] < 1e-5


@given(seed=seeds, N=st.integers(1, 10), rank=st.integers(1, 10))
def test_theta_of_lambda_residual(seed, N, rank):
    rng = np.random.default_rng(seed)
    sub = random_sub(rng, N, min(rank, N))
    lam = rng.exponential(1.0, N)
    theta = theta_of_lambda(lam, sub)
    resid = (sub.A + np.diag(lam)) @ theta - sub.u / 2
    assert np.linalg.norm(resid) <= 1e-10 * np.linalg.norm(sub.u)


def test_singular_system_gets_regularized():
    A = np.zeros((3, 3), complex)
    A[0, 0] = 1.0
    sub = ThetaSubproblem(A, np.array([1.0, 1.0, 0.0], complex))
    theta = theta_of_lambda(np.zeros(3), sub)
    assert np.all(np.isfinite(theta))
    assert theta_of_lambda(np.zeros(3), ThetaSubproblem(A, np.zeros(3, complex))).tolist() == [0, 0, 0]


def test_dual_value_without_active_constraints():
    sub = ThetaSubproblem(np.eye(3, dtype=complex), np.full(3, 1.0 + 0.5j))
    theta0 = theta_of_lambda(np.zeros(3), sub)
    assert dual_value(np.zeros(3), sub) == pytest.approx(sub.objective(theta0), rel=1e-14)


@given(seed=seeds, N=st.integers(1, 8))
def test_weak_duality(seed, N):
    rng = np.random.default_rng(seed)
    sub = random_sub(rng, N, scale=10.0)
    lam = rng.exponential(2.0, N)
    d = dual_value(lam, sub)
    for _ in range(100):
        t = np.exp(2j * np.pi * rng.random(N)) * np.sqrt(rng.random(N))
        assert d >= sub.objective(t) - 1e-9 * max(1.0, abs(d))


def test_huge_multiplier_removes_one_element(rng):
    N, i, big = 5, 2, 1e9
    sub = random_sub(rng, N)
    lam = rng.exponential(1.0, N)
    lam[i] = big
    theta = theta_of_lambda(lam, sub)
    assert abs(theta[i]) < 1e-7
    keep = [n for n in range(N) if n != i]
    reduced = ThetaSubproblem(sub.A[np.ix_(keep, keep)], sub.u[keep])
    expected = dual_value(lam[keep], reduced) + big
    assert dual_value(lam, sub) == pytest.approx(expected, rel=1e-12)


@given(seed=seeds, N=st.integers(1, 8))
def test_dual_convexity_and_subgradient(seed, N):
    rng = np.random.default_rng(seed)
    sub = random_sub(rng, N, scale=10.0)
    l1, l2 = rng.exponential(2.0, N), rng.exponential(2.0, N)
    t = rng.random()
    d1, d2 = dual_value(l1, sub), dual_value(l2, sub)
    assert dual_value(t * l1 + (1 - t) * l2, sub) <= t * d1 + (1 - t) * d2 + 1e-9
    s = 1.0 - np.abs(theta_of_lambda(l1, sub)) ** 2
    assert d2 >= d1 + s @ (l2 - l1) - 1e-9


def test_fast_path():
    sub = ThetaSubproblem(np.eye(3, dtype=complex), np.full(3, 0.5 + 0j))
    rep = solve_dual(sub)
    assert rep.fast_path_taken and rep.iterations == 0
    np.testing.assert_array_equal(rep.lam, 0.0)
    assert rep.kkt_residual <= 1e-10


@pytest.mark.parametrize("method", ["ellipsoid", "barrier"])
@pytest.mark.parametrize("a, u", [(0.3, 2.0), (1.0, -5.0), (0.01, 0.5), (2.0, 3 + 4j)])
def test_scalar_case(method, a, u):
    sub = ThetaSubproblem(np.array([[a]], complex), np.array([u], complex))
    rep = solve_dual(sub, tol_kkt=1e-12, method=method)
    assert rep.lam[0] == pytest.approx(abs(u) / 2 - a, abs=1e-10)
    assert rep.theta[0] == pytest.approx(u / abs(u), abs=1e-9)
    assert (a + rep.lam[0]) * rep.theta[0] == pytest.approx(u / 2, abs=1e-9)


@pytest.mark.parametrize("method", ["ellipsoid", "barrier"])
@pytest.mark.parametrize("seed", range(6))
def test_small_subproblems_beat_random_sampling(method, seed):
    rng = np.random.default_rng(seed)
    N = 1 + seed
    sub = random_sub(rng, N, scale=10.0)
    rep = solve_dual(sub, method=method)
    assert rep.converged
    assert rep.gap <= 1e-5 * max(1.0, abs(rep.dual_value))
    samples = np.exp(2j * np.pi * rng.random((100_000, N))) * np.sqrt(rng.random((100_000, N)))
    values = (samples.conj() @ sub.u).real - np.einsum("sn,nm,sm->s", samples.conj(), sub.A, samples).real
    assert rep.primal_value >= values.max() - 1e-9


@given(seed=seeds, K=st.integers(1, 4), M=st.integers(1, 4))
def test_instance_subproblems_solve_to_kkt(seed, K, M):
    *_, sub = instance_sub(seed, K=K, L=2, M=M)
    rep = solve_dual(sub, method="barrier")
    assert rep.converged
    assert np.all(np.abs(rep.theta) ** 2 <= 1 + 1e-8)
    assert np.all(rep.lam >= 0)
    rho = np.linalg.norm(sub.u)
    assert rep.gap <= 1e-5 * max(rho, abs(rep.dual_value))
    # every dual optimum lies inside the initial ellipsoid of the cutting-plane method
    assert rep.lam.sum() <= np.sqrt(sub.N) * rho / 2 * (1 + 1e-6)


def test_kkt_residual_examples():
    theta = np.array([1.0 + 0j, 0.5, 0.2j])
    assert kkt_residual(theta, np.array([1.0, 0.0, 0.0])) == 0.0
    assert kkt_residual(np.array([1.1 + 0j]), np.zeros(1)) == pytest.approx(0.21)
    assert kkt_residual(np.array([0.5 + 0j]), np.array([-0.1])) == pytest.approx(0.1)


def test_kkt_residual_grows_when_multiplier_is_perturbed():
    sub = ThetaSubproblem(np.array([[0.3, 0.1], [0.1, 0.2]], complex), np.array([3.0, 2.0j]))
    rep = solve_dual(sub, tol_kkt=1e-10, method="barrier")
    lam = rep.lam.copy()
    lam[0] += 0.1
    theta = theta_of_lambda(lam, sub)
    slack = 1 - abs(theta[0]) ** 2
    assert slack > 0
    assert kkt_residual(theta, lam) >= 0.1 * slack * (1 - 1e-6)
    assert kkt_residual(theta, lam) > rep.kkt_residual


def test_lagrangian_constant_terms():
    sub = random_sub(np.random.default_rng(3), 3)
    theta = np.exp(1j * np.arange(3))
    assert lagrangian(theta, np.full(3, 5.0), sub) == pytest.approx(sub.objective(theta), rel=1e-13)


def test_ellipsoid_cap_and_reporting_on_exhaustion():
    assert default_ellipsoid_cap(16) == int(np.ceil(4 * 256 * np.log(8 / 1e-8)))
    sub = random_sub(np.random.default_rng(4), 6, scale=20.0)
    rep = solve_dual(sub, tol_kkt=1e-14, max_ellipsoid_iter=5)
    assert not rep.converged
    assert rep.iterations == 5 or rep.iterations < 5
    assert np.all(np.abs(rep.theta) <= 1 + 1e-12)


def test_unknown_method():
    with pytest.raises(ValueError):
        solve_dual(random_sub(np.random.default_rng(0), 2), method="interior")
