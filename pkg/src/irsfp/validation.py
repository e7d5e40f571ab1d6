"""Randomized correctness checks shared by the ``validate`` command and the test suite.

Every check returns a :class:`CheckResult`; sizes are parameters so the
command line can run a quick version and the tests the full one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import oracle, qcqp
from .baselines import run_scheme
from .channel import DEFAULT_IRS_POSITIONS, Scenario, draw_instance, random_phases
from .fp import SolverOptions, solve, update_alpha, update_beta, update_mu, update_power
from .rates import eval_f1, eval_f2, eval_g1, eval_g2, sum_rate

MONOTONE_SLACK = 1e-9


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        info = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {info}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def _rel(a, b) -> float:
    return abs(a - b) / max(abs(a), abs(b), np.finfo(float).tiny)


def small_scenario(K: int, L: int, M: int, **kw) -> Scenario:
    """Scenario with ``L`` IRSs at the first ``L`` default positions (random if L > 4)."""
    positions = DEFAULT_IRS_POSITIONS[:L] if L <= len(DEFAULT_IRS_POSITIONS) else None
    return Scenario(K=K, L=L, M=(M,) * L, irs_positions=positions, **kw)


def random_state(rng: np.random.Generator, max_K: int = 4, max_L: int = 2, max_M: int = 4):
    """Random instance plus a random feasible ``(p, theta)`` on it."""
    K = int(rng.integers(1, max_K + 1))
    L = int(rng.integers(1, max_L + 1))
    M = int(rng.integers(1, max_M + 1))
    sc = small_scenario(K, L, M)
    mode = "realization" if rng.random() < 0.25 else "expectation"
    _, _, eff = draw_instance(sc, int(rng.integers(2**31)), mode)
    p = sc.p_max * rng.random(K)
    theta = random_phases(rng, eff.N) * np.sqrt(rng.random(eff.N))
    return sc, eff, p, theta


def check_monotone_convergence(instances: int = 100, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    violations, worst, iters = 0, 0.0, []
    for i in range(instances):
        K = int(rng.choice([2, 4, 6]))
        L = int(rng.choice([1, 2, 4]))
        M = int(rng.choice([2, 4]))
        sc = small_scenario(K, L, M)
        _, _, eff = draw_instance(sc, seed * 100003 + i)
        _, trace = solve(sc, eff, SolverOptions(seed=i))
        ok, drop = oracle.check_monotone(trace, MONOTONE_SLACK)
        violations += not ok
        worst = max(worst, drop)
        iters.append(trace.iterations)
    return CheckResult(
        "monotone f1 traces",
        violations == 0,
        {"instances": instances, "violations": violations, "worst_drop": worst,
         "median_iterations": float(np.median(iters))},
    )


def check_reformulation(states: int = 1000, seed: int = 1, tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(states):
        sc, eff, p, theta = random_state(rng)
        mu = update_mu(p, theta, eff, sc.sigma_d2)
        worst = max(worst, _rel(eval_f1(p, theta, mu, eff, sc.sigma_d2), sum_rate(p, theta, eff, sc.sigma_d2)))
    return CheckResult("f1 at mu* equals sum rate", worst <= tol, {"states": states, "worst_rel": worst})


def check_tightness(states: int = 1000, seed: int = 2, tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_tight, worst_bound = 0.0, -np.inf
    for _ in range(states):
        sc, eff, p, theta = random_state(rng)
        s2 = sc.sigma_d2
        mu = rng.exponential(5.0, eff.K)
        f2 = eval_f2(p, theta, mu, eff, s2)
        alpha = update_alpha(p, theta, mu, eff, s2)
        beta = update_beta(theta, p, mu, eff, s2)
        worst_tight = max(
            worst_tight,
            _rel(eval_g1(p, alpha, theta, mu, eff, s2), f2),
            _rel(eval_g2(theta, beta, p, mu, eff, s2), f2),
        )
        alpha_r = alpha * rng.uniform(0.0, 3.0, eff.K)
        beta_r = beta * rng.uniform(0.0, 3.0, eff.K) * np.exp(2j * np.pi * rng.random(eff.K))
        scale = max(abs(f2), np.finfo(float).tiny)
        worst_bound = max(
            worst_bound,
            (eval_g1(p, alpha_r, theta, mu, eff, s2) - f2) / scale,
            (eval_g2(theta, beta_r, p, mu, eff, s2) - f2) / scale,
        )
    passed = worst_tight <= tol and worst_bound <= tol
    return CheckResult(
        "quadratic-transform tightness and bound",
        passed,
        {"states": states, "worst_tight_rel": worst_tight, "worst_excess_rel": worst_bound},
    )


def check_stationarity(instances: int = 50, seed: int = 3, tol: float = 1e-6, step: float = 1e-5) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = {"f1_mu": 0.0, "g1_alpha": 0.0, "g1_p": 0.0, "g2_beta": 0.0, "lagrangian_theta": 0.0}
    interior = 0
    for _ in range(instances):
        sc, eff, p, theta = random_state(rng)
        s2 = sc.sigma_d2
        mu = update_mu(p, theta, eff, s2)
        d = rng.standard_normal(eff.K) * np.maximum(mu, 1e-3)
        worst["f1_mu"] = max(worst["f1_mu"], oracle.finite_diff_check(
            lambda m: eval_f1(p, theta, m, eff, s2), mu, d, step))

        mu_r = rng.exponential(5.0, eff.K)
        alpha = update_alpha(p, theta, mu_r, eff, s2)
        d = rng.standard_normal(eff.K) * np.abs(alpha)
        worst["g1_alpha"] = max(worst["g1_alpha"], oracle.finite_diff_check(
            lambda a: eval_g1(p, a, theta, mu_r, eff, s2), alpha, d, step))

        p_star = update_power(alpha, theta, mu_r, eff, sc.p_max)
        for k in np.flatnonzero((p_star > 0) & (p_star < sc.p_max * (1 - 1e-9))):
            interior += 1
            e = np.zeros(eff.K)
            e[k] = p_star[k]
            worst["g1_p"] = max(worst["g1_p"], oracle.finite_diff_check(
                lambda q: eval_g1(q, alpha, theta, mu_r, eff, s2), p_star, e, step))

        beta = update_beta(theta, p, mu_r, eff, s2)
        for d in (rng.standard_normal(eff.K), 1j * rng.standard_normal(eff.K)):
            worst["g2_beta"] = max(worst["g2_beta"], oracle.finite_diff_check(
                lambda b: eval_g2(theta, b, p, mu_r, eff, s2), beta, d * np.abs(beta), step))

        sub = qcqp.build_subproblem(p, mu_r, beta, eff, s2)
        lam = rng.exponential(1.0, eff.N) * max(np.linalg.norm(sub.u), 1e-300)
        th = qcqp.theta_of_lambda(lam, sub)
        base = np.abs(th).max()
        # the Lagrangian's constant sum(lam) is dropped so the scale is its theta-dependent part
        lag = lambda t: qcqp.lagrangian(t, lam, sub) - float(lam.sum()) + sub.offset
        scale = max(abs(lag(th)), np.finfo(float).tiny)
        for d in (rng.standard_normal(eff.N), 1j * rng.standard_normal(eff.N)):
            worst["lagrangian_theta"] = max(worst["lagrangian_theta"], oracle.finite_diff_check(
                lag, th, d * base, step, scale=scale))
    detail = {"instances": instances, "interior_p_coords": interior, **{k: float(v) for k, v in worst.items()}}
    return CheckResult("closed-form stationarity", max(worst.values()) <= tol, detail)


def random_subproblem(rng: np.random.Generator, N: int):
    """A theta-subproblem built from a random channel instance with ``N`` elements."""
    L = int(rng.integers(1, min(N, 4) + 1))
    sizes = np.full(L, N // L)
    sizes[: N % L] += 1
    K = int(rng.integers(1, 7))
    sc = Scenario(K=K, L=L, M=tuple(int(m) for m in sizes), irs_positions=DEFAULT_IRS_POSITIONS[:L])
    _, _, eff = draw_instance(sc, int(rng.integers(2**31)))
    p = sc.p_max * rng.random(K)
    p[rng.random(K) < 0.2] = 0.0
    theta = random_phases(rng, N)
    mu = update_mu(p, theta, eff, sc.sigma_d2)
    beta = update_beta(theta, p, mu, eff, sc.sigma_d2)
    return qcqp.build_subproblem(p, mu, beta, eff, sc.sigma_d2)


def check_duality(subproblems: int = 100, seed: int = 4, method: str = "ellipsoid",
                  gap_tol: float = 1e-5, kkt_tol: float = 1e-6) -> CheckResult:
    """Gap is relative in units where ``||u|| = 1``, i.e. ``gap / max(||u||, |dual|)``."""
    rng = np.random.default_rng(seed)
    worst_gap, worst_kkt, solved = 0.0, 0.0, 0
    for _ in range(subproblems):
        N = int(rng.integers(1, 17))
        sub = random_subproblem(rng, N)
        if not np.any(sub.u):
            continue
        rep = qcqp.solve_dual(sub, tol_kkt=kkt_tol, method=method)
        solved += 1
        rho = np.linalg.norm(sub.u)
        worst_gap = max(worst_gap, rep.gap / max(rho, abs(rep.dual_value)))
        worst_kkt = max(worst_kkt, rep.kkt_residual)

    # scalar case: (a + lam) theta = u / 2 with |theta| = 1
    a, u = 0.3, 2.0
    rep = qcqp.solve_dual(qcqp.ThetaSubproblem(np.array([[a]], dtype=complex), np.array([u], dtype=complex)),
                          tol_kkt=1e-12, method=method)
    scalar_err = abs(rep.lam[0] - (abs(u) / 2 - a))
    passed = worst_gap <= gap_tol and worst_kkt <= kkt_tol and scalar_err <= 1e-10
    return CheckResult(
        f"dual solve ({method})",
        passed,
        {"subproblems": solved, "worst_rel_gap": worst_gap, "worst_kkt": worst_kkt, "scalar_lambda_err": scalar_err},
    )


def check_oracle_dominance(instances: int = 50, seed: int = 5, Q: int = 16, levels: int = 8) -> CheckResult:
    sc = small_scenario(2, 1, 2)
    ratios = []
    for i in range(instances):
        _, _, eff = draw_instance(sc, seed * 100003 + i)
        _, _, best = oracle.brute_force_joint(eff, Q, levels, sc.p_max, sc.sigma_d2)
        _, report, _ = run_scheme("joint", eff, sc, SolverOptions(seed=i))
        ratios.append(report.sum_rate / best)
    frac = oracle.fraction_at_least(ratios, 0.98)
    low = float(np.min(ratios))
    return CheckResult(
        "solver vs brute-force grid",
        frac >= 0.8 and low >= 0.9,
        {"instances": instances, "frac_ge_0.98": frac, "min_ratio": low, "median_ratio": float(np.median(ratios))},
    )


QUICK_SIZES = {
    "monotone": 10, "reformulation": 100, "tightness": 100, "stationarity": 10,
    "duality": 20, "oracle": 5,
}


def run_suite(sizes: dict | None = None, seed: int = 0) -> list[CheckResult]:
    sizes = {**QUICK_SIZES, **(sizes or {})}
    return [
        check_monotone_convergence(sizes["monotone"], seed),
        check_reformulation(sizes["reformulation"], seed + 1),
        check_tightness(sizes["tightness"], seed + 2),
        check_stationarity(sizes["stationarity"], seed + 3),
        check_duality(sizes["duality"], seed + 4, method="barrier"),
        check_duality(sizes["duality"], seed + 4, method="ellipsoid"),
        check_oracle_dominance(sizes["oracle"], seed + 5),
    ]
