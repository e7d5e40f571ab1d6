"""Alternating fractional-programming optimization of powers and phase shifts.

One outer iteration updates, in order: ``mu`` (SINR at the current point),
``alpha`` and ``p`` (power block), ``beta`` and ``theta`` (reflection block).
The recorded objective ``f1(p, theta, mu)`` is nondecreasing across
iterations; the loop stops once its increase drops to ``epsilon`` or below.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import qcqp
from .channel import EffectiveChannels, Scenario, random_phases
from .rates import BeamformingState, eval_f1, link_terms, sinr, sum_rate

log = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-9


@dataclass
class SolverOptions:
    epsilon: float = 1e-4
    max_iter: int = 500
    theta_init: Union[str, np.ndarray] = "random"
    p_init: Union[str, np.ndarray] = "full"
    seed: int = 0
    noise_mode: str = "expectation"
    tol_kkt: float = 1e-6
    dual_method: str = "barrier"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if isinstance(self.theta_init, str) and self.theta_init != "random":
            raise ValueError(f"unknown theta_init {self.theta_init!r}")
        if isinstance(self.p_init, str) and self.p_init != "full":
            raise ValueError(f"unknown p_init {self.p_init!r}")


@dataclass(frozen=True)
class IterationRecord:
    t: int
    f1: float
    sum_rate: float
    p: np.ndarray
    theta_residual: float
    kkt_residual: float
    wall_ms: float
    fast_path: bool = False


@dataclass
class ConvergenceTrace:
    records: list = field(default_factory=list)
    terminated_reason: str = ""

    @property
    def f1_values(self) -> np.ndarray:
        return np.array([r.f1 for r in self.records])

    @property
    def sum_rates(self) -> np.ndarray:
        return np.array([r.sum_rate for r in self.records])

    @property
    def iterations(self) -> int:
        return len(self.records) - 1

    @property
    def fast_path_fraction(self) -> float:
        steps = self.records[1:]
        if not steps:
            return 0.0
        return sum(r.fast_path for r in steps) / len(steps)

    @property
    def wall_ms(self) -> float:
        return sum(r.wall_ms for r in self.records)


def update_mu(p, theta, eff: EffectiveChannels, sigma_d2: float) -> np.ndarray:
    return sinr(p, theta, eff, sigma_d2)


def update_alpha(p, theta, mu, eff: EffectiveChannels, sigma_d2: float) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    _, a, D = link_terms(p, theta, eff, sigma_d2)
    return np.sqrt(2.0 * (1.0 + mu) * np.diag(a) * p) / (2.0 * D)


def update_power(alpha, theta, mu, eff: EffectiveChannels, p_max: float) -> np.ndarray:
    """Maximizer of ``g1`` over the box ``[0, p_max]`` for fixed ``alpha``.

    The denominator weighs the interference source ``k`` causes at every
    destination. Sources that cause none get the cap.
    """
    s = np.einsum("n,ikn->ik", theta.conj(), eff.v)
    a = np.abs(s) ** 2
    leak = a @ (alpha**2)
    num = alpha**2 * (1.0 + mu) * np.diag(a)
    p = np.full(len(alpha), float(p_max))
    ok = leak > 0
    p[ok] = np.minimum(p_max, num[ok] / (2.0 * leak[ok] ** 2))
    return p


def update_beta(theta, p, mu, eff: EffectiveChannels, sigma_d2: float) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    s, _, D = link_terms(p, theta, eff, sigma_d2)
    return np.sqrt(2.0 * p * (1.0 + mu)) * np.diag(s) / (2.0 * D)


def update_theta(
    theta, p, mu, beta, eff: EffectiveChannels, sigma_d2: float,
    options: Optional[SolverOptions] = None, lambda_init=None,
):
    """Solve the reflection subproblem; never returns a point worse than ``theta``.

    Returns ``(theta_new, report)``; ``report`` is None for a degenerate
    subproblem (``u = 0``), in which case ``theta`` is kept.
    """
    options = options or SolverOptions()
    sub = qcqp.build_subproblem(p, mu, beta, eff, sigma_d2)
    if not np.any(sub.u):
        return theta, None
    report = qcqp.solve_dual(
        sub, tol_kkt=options.tol_kkt, method=options.dual_method, lambda_init=lambda_init
    )
    if sub.objective(report.theta) < sub.objective(theta):
        return theta, report
    return report.theta, report


def _initial_point(scenario: Scenario, eff: EffectiveChannels, options: SolverOptions):
    rng = np.random.default_rng([int(options.seed), 7])
    if isinstance(options.theta_init, str):
        theta = random_phases(rng, eff.N)
    else:
        theta = np.asarray(options.theta_init, dtype=complex).copy()
    if isinstance(options.p_init, str):
        p = np.full(eff.K, float(scenario.p_max))
    else:
        p = np.clip(np.asarray(options.p_init, dtype=float), 0.0, scenario.p_max)
    if theta.shape != (eff.N,) or p.shape != (eff.K,):
        raise ValueError("initial point dimensions do not match the channels")
    return p, theta


def run_blocks(
    eff: EffectiveChannels,
    p_max: float,
    sigma_d2: float,
    p0,
    theta0,
    options: SolverOptions,
    optimize_power: bool = True,
    optimize_phase: bool = True,
):
    """Outer loop shared by the joint solver and the single-block baselines."""
    p = np.asarray(p0, dtype=float).copy()
    theta = np.asarray(theta0, dtype=complex).copy()
    state = BeamformingState(p=p, theta=theta)
    trace = ConvergenceTrace()
    start = time.perf_counter()
    prev = sum_rate(p, theta, eff, sigma_d2)
    trace.records.append(
        IterationRecord(0, prev, prev, p.copy(), _theta_residual(theta), 0.0, 0.0)
    )
    lam = None
    for t in range(1, options.max_iter + 1):
        tic = time.perf_counter()
        mu = update_mu(p, theta, eff, sigma_d2)
        state.mu = mu
        if optimize_power:
            state.alpha = update_alpha(p, theta, mu, eff, sigma_d2)
            p = update_power(state.alpha, theta, mu, eff, p_max)
        kkt, fast = 0.0, False
        if optimize_phase:
            state.beta = update_beta(theta, p, mu, eff, sigma_d2)
            theta, report = update_theta(
                theta, p, mu, state.beta, eff, sigma_d2, options, lambda_init=lam
            )
            if report is not None:
                lam = report.lam
                kkt, fast = report.kkt_residual, report.fast_path_taken
                state.lam = lam
        state.p, state.theta = p, theta
        f1 = eval_f1(p, theta, mu, eff, sigma_d2)
        if f1 < prev - MONOTONE_SLACK * abs(prev):
            log.warning("f1 decreased at iteration %d: %.17g -> %.17g", t, prev, f1)
        trace.records.append(
            IterationRecord(
                t, f1, sum_rate(p, theta, eff, sigma_d2), p.copy(), _theta_residual(theta),
                kkt, (time.perf_counter() - tic) * 1e3, fast,
            )
        )
        if f1 - prev <= options.epsilon:
            trace.terminated_reason = "epsilon_reached"
            break
        prev = f1
    else:
        trace.terminated_reason = "max_iter"
    log.debug(
        "stopped after %d iterations (%s) in %.1f ms",
        trace.iterations, trace.terminated_reason, (time.perf_counter() - start) * 1e3,
    )
    return state, trace


def _theta_residual(theta) -> float:
    return float(max(0.0, np.max(np.abs(theta) ** 2) - 1.0))


def solve(scenario: Scenario, eff: EffectiveChannels, options: Optional[SolverOptions] = None):
    """Joint power control and passive beamforming; returns ``(state, trace)``."""
    options = options or SolverOptions()
    p0, theta0 = _initial_point(scenario, eff, options)
    return run_blocks(eff, scenario.p_max, scenario.sigma_d2, p0, theta0, options)
