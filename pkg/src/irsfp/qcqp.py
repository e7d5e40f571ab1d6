"""Reflection-coefficient subproblem solved through its Lagrange dual.

The subproblem is the concave QCQP

    maximize  q(theta) = Re{u^H theta} - theta^H A theta - offset
    s.t.      |theta_n|**2 <= 1,  n = 1..N

which is ``ln 2`` times ``g2(theta, beta)`` for fixed ``beta``. For a
multiplier vector ``lam >= 0`` the Lagrangian is maximized in closed form by
``theta(lam) = 0.5 * (diag(lam) + A)^{-1} u`` and the dual function
``d(lam) = q(theta(lam)) - sum_n lam_n (|theta_n|**2 - 1)`` is convex with
gradient ``1 - |theta(lam)|**2``. ``d`` is minimized either by the
ellipsoid method or by a log-barrier Newton method; both stop on the same
KKT tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky

from .channel import EffectiveChannels

COND_LIMIT = 1e12


@dataclass(frozen=True)
class ThetaSubproblem:
    A: np.ndarray
    u: np.ndarray
    offset: float = 0.0

    @property
    def N(self) -> int:
        return self.u.shape[0]

    def objective(self, theta: np.ndarray) -> float:
        return float(
            np.real(np.vdot(self.u, theta)) - np.real(np.vdot(theta, self.A @ theta)) - self.offset
        )

    def scaled(self, factor: float) -> "ThetaSubproblem":
        return ThetaSubproblem(self.A * factor, self.u * factor, self.offset * factor)


@dataclass(frozen=True)
class DualSolveReport:
    lam: np.ndarray
    theta: np.ndarray
    dual_value: float
    primal_value: float
    kkt_residual: float
    iterations: int
    fast_path_taken: bool
    method: str
    converged: bool

    @property
    def gap(self) -> float:
        return self.dual_value - self.primal_value


def build_subproblem(p, mu, beta, eff: EffectiveChannels, sigma_d2: float) -> ThetaSubproblem:
    """``A = sum_k |beta_k|^2 (sum_i p_i v_ik v_ik^H + C_k)``, ``u = sum_k c_k conj(beta_k) v_kk``.

    The reflected-noise covariance sits inside the ``|beta_k|^2`` weight, which
    makes ``A`` the exact Hessian block of ``g2``.
    """
    p = np.asarray(p, dtype=float)
    w = np.abs(beta) ** 2
    X = (np.sqrt(p)[:, None, None] * np.sqrt(w)[None, :, None] * eff.v).reshape(-1, eff.N)
    A = X.T @ X.conj() + np.tensordot(w, eff.C, axes=1)
    A = 0.5 * (A + A.conj().T)
    K = eff.K
    coef = np.sqrt(2.0 * p * (1.0 + np.asarray(mu, dtype=float)))
    u = (coef * beta.conj()) @ eff.v[np.arange(K), np.arange(K)]
    return ThetaSubproblem(A, u, float(np.sum(w) * sigma_d2))


def _factor(S: np.ndarray) -> Optional[np.ndarray]:
    try:
        L = cholesky(S, lower=True, check_finite=False)
    except LinAlgError:
        return None
    d = np.abs(np.diag(L))
    if d.min() <= d.max() / math.sqrt(COND_LIMIT):
        return None
    return L


def _factor_shifted(A: np.ndarray, lam: np.ndarray) -> np.ndarray:
    S = A + np.diag(lam)
    L = _factor(S)
    if L is None:
        N = A.shape[0]
        delta = 1e-12 * (np.trace(A).real / N + float(np.mean(lam)) + 1.0)
        shift = delta
        while L is None:
            L = _factor(S + shift * np.eye(N))
            shift *= 100.0
    return L


def theta_of_lambda(lam, sub: ThetaSubproblem) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if not np.any(sub.u):
        return np.zeros(sub.N, dtype=complex)
    L = _factor_shifted(sub.A, lam)
    return 0.5 * cho_solve((L, True), sub.u, check_finite=False)


def lagrangian(theta, lam, sub: ThetaSubproblem) -> float:
    return sub.objective(theta) - float(np.sum(lam * (np.abs(theta) ** 2 - 1.0)))


def dual_value(lam, sub: ThetaSubproblem) -> float:
    lam = np.asarray(lam, dtype=float)
    return lagrangian(theta_of_lambda(lam, sub), lam, sub)


def kkt_residual(theta, lam, sub: Optional[ThetaSubproblem] = None) -> float:
    """Worst violation of primal feasibility, dual feasibility and complementary slackness.

    Stationarity holds by construction for ``theta = theta_of_lambda(lam)``.
    """
    lam = np.asarray(lam, dtype=float)
    slack = np.abs(theta) ** 2 - 1.0
    worst = np.maximum.reduce([np.abs(lam * slack), slack, -lam])
    return float(max(0.0, worst.max()))


def _project_feasible(theta: np.ndarray) -> np.ndarray:
    return theta / np.maximum(1.0, np.abs(theta))


def default_ellipsoid_cap(N: int) -> int:
    R = 2.0 * math.sqrt(N)
    return int(math.ceil(4 * N * N * math.log(R / 1e-8)))


class _Dual:
    """Dual oracle on a subproblem normalized to ``||u|| = 1``."""

    def __init__(self, sub: ThetaSubproblem):
        self.A = sub.A
        self.u = sub.u
        self.evals = 0

    def at(self, lam):
        self.evals += 1
        L = _factor_shifted(self.A, lam)
        theta = 0.5 * cho_solve((L, True), self.u, check_finite=False)
        m = np.abs(theta) ** 2
        value = 0.5 * float(np.real(np.vdot(self.u, theta))) + float(np.sum(lam))
        return theta, m, value, L


def _dual_hessian(theta, L):
    """Hessian of the dual function: ``2 Re{conj(theta_n) [S^-1]_nm theta_m}``."""
    N = theta.shape[0]
    Sinv = cho_solve((L, True), np.eye(N), check_finite=False)
    return 2.0 * np.real(theta.conj()[:, None] * Sinv * theta[None, :])


def _refine(dual: _Dual, lam, theta, L, tol):
    """Newton steps on the equations ``|theta_n|^2 = 1`` of the nearly tight constraints.

    Multipliers of slack constraints are set to zero. Each step is kept only
    if it lowers the KKT residual.
    """
    res = kkt_residual(theta, lam)
    for _ in range(3):
        m = np.abs(theta) ** 2
        active = (lam > 0) & (m > 1.0 - math.sqrt(tol))
        if not active.any():
            break
        H = _dual_hessian(theta, L)[np.ix_(active, active)]
        trial = np.zeros_like(lam)
        try:
            trial[active] = lam[active] - np.linalg.solve(H, 1.0 - m[active])
        except np.linalg.LinAlgError:
            break
        trial = np.maximum(trial, 0.0)
        t_theta, _, _, t_L = dual.at(trial)
        t_res = kkt_residual(t_theta, trial)
        if not t_res < res:
            break
        lam, theta, L, res = trial, t_theta, t_L, t_res
    return lam, theta


def _barrier(dual: _Dual, lam0: np.ndarray, tol: float, max_newton: int = 300):
    """Path-following Newton method on ``d(lam) - tau * sum(log lam)``.

    On the central path ``lam_n (1 - |theta_n|^2) = tau``, so ``theta(lam)``
    stays strictly feasible and the KKT residual is governed by ``tau``,
    which is cut tenfold each time the iterate is re-centred.
    """
    lam = np.maximum(np.asarray(lam0, dtype=float), 1e-12)
    theta, m, value, L = dual.at(lam)
    tau = max(float(np.mean(lam * np.abs(1.0 - m))), tol)
    for it in range(1, max_newton + 1):
        grad = 1.0 - m - tau / lam
        H = _dual_hessian(theta, L) + np.diag(tau / lam**2)
        try:
            step = -np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            return lam, theta, it, False
        decrement = -float(grad @ step)
        down = step < 0
        t = min(1.0, 0.99 * float(np.min(lam[down] / -step[down]))) if down.any() else 1.0
        merit = value - tau * float(np.sum(np.log(lam)))
        for _ in range(60):
            trial = lam + t * step
            t_theta, t_m, t_value, t_L = dual.at(trial)
            t_merit = t_value - tau * float(np.sum(np.log(trial)))
            if t_merit <= merit - 1e-4 * t * decrement + 1e-14 * abs(merit):
                break
            t *= 0.5
        else:
            return lam, theta, it, False
        lam, theta, m, value, L = trial, t_theta, t_m, t_value, t_L
        if decrement < 1e-2:
            if tau <= tol and kkt_residual(theta, lam) <= tol:
                lam, theta = _refine(dual, lam, theta, L, tol)
                return lam, theta, it, True
            tau = max(0.1 * tau, 0.1 * tol)
    return lam, theta, max_newton, kkt_residual(theta, lam) <= tol


def _ellipsoid(dual: _Dual, N: int, tol: float, cap: int):
    """Central-cut ellipsoid method over ``lam`` (normalized units).

    Returns the centre with the smallest KKT residual seen.
    """
    R = 2.0 * math.sqrt(N)
    center = np.ones(N)
    best = None
    if N == 1:
        lo, hi = center[0] - R, center[0] + R
        for it in range(1, cap + 1):
            c = 0.5 * (lo + hi)
            if c < 0:
                lo = c
                continue
            lam = np.array([c])
            theta, m, _, _ = dual.at(lam)
            res = kkt_residual(theta, lam)
            if best is None or res < best[0]:
                best = (res, lam, theta, it)
            if res <= tol or hi - lo < 1e-15:
                break
            if m[0] < 1.0:
                hi = c
            else:
                lo = c
        return best

    P = np.eye(N) * R * R
    expand = N * N / (N * N - 1.0)
    for it in range(1, cap + 1):
        if np.any(center < 0):
            gvec = np.zeros(N)
            gvec[int(np.argmin(center))] = -1.0
        else:
            theta, m, _, _ = dual.at(center)
            res = kkt_residual(theta, center)
            if best is None or res < best[0]:
                best = (res, center.copy(), theta, it)
            if res <= tol:
                break
            gvec = 1.0 - m
        Pg = P @ gvec
        gPg = float(gvec @ Pg)
        if not gPg > 0:
            break
        b = Pg / math.sqrt(gPg)
        center = center - b / (N + 1)
        P = expand * (P - (2.0 / (N + 1)) * np.outer(b, b))
        P = 0.5 * (P + P.T)
        if np.max(np.diag(P)) < 1e-30:
            break
    if best is None:
        lam = np.maximum(center, 0.0)
        theta, _, _, _ = dual.at(lam)
        best = (kkt_residual(theta, lam), lam, theta, cap)
    return best


DUAL_METHODS = ("ellipsoid", "barrier")


def solve_dual(
    sub: ThetaSubproblem,
    tol_kkt: float = 1e-6,
    max_ellipsoid_iter: Optional[int] = None,
    method: str = "ellipsoid",
    lambda_init: Optional[np.ndarray] = None,
) -> DualSolveReport:
    """Minimize the dual function over ``lam >= 0`` and recover a feasible theta.

    If ``theta(0)`` is already feasible it is optimal and returned at once.
    Otherwise ``method="ellipsoid"`` runs the central-cut ellipsoid method
    starting from the ball centred at ``rho * 1`` with radius
    ``2 rho sqrt(N)``, ``rho = ||u||``. Complementary slackness gives
    ``sum_n lam*_n = Re{u^H theta*}/2 - theta*^H A theta* <= sqrt(N) ||u|| / 2``,
    so every dual optimum lies in a simplex contained in that ball.
    ``method="barrier"`` runs a log-barrier Newton method (warm-started from
    ``lambda_init`` when given) and falls back to the ellipsoid method if it
    stalls.

    Work is done on the subproblem rescaled to ``||u|| = 1``. Multipliers and
    objective values in the report are in the caller's units;
    ``kkt_residual`` is in the normalized units. The returned theta is
    projected onto the feasible set.
    """
    if method not in DUAL_METHODS:
        raise ValueError(f"unknown dual method {method!r}")
    N = sub.N
    rho = float(np.linalg.norm(sub.u))
    if rho == 0.0:
        zero = np.zeros(N, dtype=complex)
        val = sub.objective(zero)
        return DualSolveReport(np.zeros(N), zero, val, val, 0.0, 0, True, "fast_path", True)

    norm = sub.scaled(1.0 / rho)
    dual = _Dual(norm)

    def finish(lam, theta, iterations, method_used, converged):
        feasible = _project_feasible(theta)
        return DualSolveReport(
            lam=lam * rho,
            theta=feasible,
            dual_value=lagrangian(theta, lam, norm) * rho,
            primal_value=norm.objective(feasible) * rho,
            kkt_residual=kkt_residual(theta, lam),
            iterations=iterations,
            fast_path_taken=method_used == "fast_path",
            method=method_used,
            converged=converged,
        )

    lam0 = np.zeros(N)
    theta0, m0, _, _ = dual.at(lam0)
    if np.all(m0 <= 1.0):
        return finish(lam0, theta0, 0, "fast_path", True)

    spent = 0
    if method == "barrier":
        start = np.ones(N) if lambda_init is None else np.asarray(lambda_init, dtype=float) / rho
        lam, theta, spent, ok = _barrier(dual, start, tol_kkt)
        if ok:
            return finish(lam, theta, spent, "barrier", True)

    cap = default_ellipsoid_cap(N) if max_ellipsoid_iter is None else int(max_ellipsoid_iter)
    res, lam, theta, it = _ellipsoid(dual, N, tol_kkt, cap)
    return finish(lam, theta, spent + it, "ellipsoid", res <= tol_kkt)
