"""SINR, achievable rates and the fractional-programming objectives.

The surrogate objectives are reported in bits. The Lagrangian-dual transform
is only tight at ``mu = SINR`` in natural-log units, so the linear terms of
``f1`` (and hence ``f2``, ``g1``, ``g2``) carry a ``1/ln 2`` factor next to the
``log2`` term. The maximizers of every block are unaffected by that factor.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import EffectiveChannels

LOG2E = 1.0 / np.log(2.0)


@dataclass
class BeamformingState:
    p: np.ndarray
    theta: np.ndarray
    mu: Optional[np.ndarray] = None
    alpha: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None
    lam: Optional[np.ndarray] = field(default=None)

    def is_feasible(self, p_max: float, tol: float = 1e-8) -> bool:
        return bool(
            np.all(self.p >= 0)
            and np.all(self.p <= p_max * (1 + 1e-12))
            and np.all(np.abs(self.theta) <= 1 + tol)
        )


@dataclass(frozen=True)
class RateReport:
    sinr: np.ndarray
    rate: np.ndarray
    sum_rate: float


def cross_gains(theta: np.ndarray, eff: EffectiveChannels) -> np.ndarray:
    """``s[i, k] = theta^H v[i, k]``."""
    return np.einsum("n,ikn->ik", theta.conj(), eff.v)


def reflected_noise(theta: np.ndarray, eff: EffectiveChannels) -> np.ndarray:
    """``theta^H C_k theta`` for every destination."""
    return np.einsum("n,knm,m->k", theta.conj(), eff.C, theta).real


def link_terms(p, theta, eff: EffectiveChannels, sigma_d2: float):
    """Cascaded gains, their powers and the full receive power per destination.

    Returns ``(s, a, D)`` with ``a = |s|**2`` and
    ``D_k = sum_i p_i a[i, k] + theta^H C_k theta + sigma_d2`` (all sources,
    own signal included).
    """
    s = cross_gains(theta, eff)
    a = np.abs(s) ** 2
    D = np.asarray(p, dtype=float) @ a + reflected_noise(theta, eff) + sigma_d2
    return s, a, D


def signal_and_interference(p, theta, eff: EffectiveChannels, sigma_d2: float):
    """Desired power and interference-plus-noise per destination.

    The interference is summed over ``i != k`` directly rather than taken as
    ``D - signal``, which would lose precision at high SINR.
    """
    p = np.asarray(p, dtype=float)
    a = np.abs(cross_gains(theta, eff)) ** 2
    received = p[:, None] * a
    signal = np.diag(received).copy()
    np.fill_diagonal(received, 0.0)
    return signal, received.sum(axis=0) + reflected_noise(theta, eff) + sigma_d2


def sinr(p, theta, eff: EffectiveChannels, sigma_d2: float) -> np.ndarray:
    signal, interference = signal_and_interference(p, theta, eff, sigma_d2)
    return signal / interference


def rates(sinr_values) -> RateReport:
    sinr_values = np.asarray(sinr_values, dtype=float)
    if np.any(sinr_values < 0):
        raise ValueError("SINR must be nonnegative")
    r = 0.5 * np.log2(1.0 + sinr_values)
    return RateReport(sinr_values, r, float(r.sum()))


def sum_rate(p, theta, eff: EffectiveChannels, sigma_d2: float) -> float:
    return rates(sinr(p, theta, eff, sigma_d2)).sum_rate


def constant_mu(mu) -> float:
    """The ``p, theta``-independent part of ``f1``."""
    mu = np.asarray(mu, dtype=float)
    return float(np.sum(0.5 * np.log2(1.0 + mu)) - LOG2E * np.sum(0.5 * mu))


def eval_f2(p, theta, mu, eff: EffectiveChannels, sigma_d2: float) -> float:
    p = np.asarray(p, dtype=float)
    _, a, D = link_terms(p, theta, eff, sigma_d2)
    return float(LOG2E * np.sum((1.0 + mu) * p * np.diag(a) / (2.0 * D)))


def eval_f1(p, theta, mu, eff: EffectiveChannels, sigma_d2: float) -> float:
    """``constant_mu(mu) + eval_f2(...)``, evaluated without cancellation.

    The two linear terms are merged per destination into
    ``(signal - mu * interference) / (2 D)``, which vanishes to rounding
    error at ``mu = SINR`` instead of leaving an ``O(mu * eps)`` residue.
    """
    mu = np.asarray(mu, dtype=float)
    signal, interference = signal_and_interference(p, theta, eff, sigma_d2)
    D = signal + interference
    linear = (signal - mu * interference) / (2.0 * D)
    return float(np.sum(0.5 * np.log2(1.0 + mu)) + LOG2E * np.sum(linear))


def eval_g1(p, alpha, theta, mu, eff: EffectiveChannels, sigma_d2: float) -> float:
    """Quadratic-transform surrogate of ``f2`` in the powers."""
    p = np.asarray(p, dtype=float)
    _, a, D = link_terms(p, theta, eff, sigma_d2)
    direct = alpha * np.sqrt(2.0 * (1.0 + mu) * np.diag(a) * p)
    return float(LOG2E * np.sum(direct - alpha**2 * D))


def eval_g2(theta, beta, p, mu, eff: EffectiveChannels, sigma_d2: float) -> float:
    """Quadratic-transform surrogate of ``f2`` in the reflection coefficients."""
    p = np.asarray(p, dtype=float)
    s, _, D = link_terms(p, theta, eff, sigma_d2)
    direct = np.sqrt(2.0 * p * (1.0 + mu)) * np.real(beta.conj() * np.diag(s))
    return float(LOG2E * np.sum(direct - np.abs(beta) ** 2 * D))
