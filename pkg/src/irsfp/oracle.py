"""Brute-force and finite-difference checks that do not trust the solver.

Grid searches evaluate candidates only through :func:`irsfp.rates.sinr` and
:func:`irsfp.rates.rates`; none of the closed-form update code is used here.
"""
from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

from .channel import EffectiveChannels
from .rates import rates, sinr

GRID_CAP = 10**7


class TooLargeError(ValueError):
    """Raised before allocation when an exhaustive grid would exceed :data:`GRID_CAP`."""


def _sum_rate(p, theta, eff, sigma_d2) -> float:
    return rates(sinr(p, theta, eff, sigma_d2)).sum_rate


def phase_grid(Q: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(Q) / Q)


def power_grid(levels: int, p_max: float) -> np.ndarray:
    if levels < 2:
        raise ValueError("power grid needs at least two levels")
    return np.linspace(0.0, p_max, levels)


def _check_size(base: int, exponent: int, what: str):
    # compare in integers so huge grids are refused without overflow
    if base**exponent > GRID_CAP:
        raise TooLargeError(f"{what} grid has {base}^{exponent} points, cap is {GRID_CAP}")


def brute_force_theta(eff: EffectiveChannels, p, Q: int, sigma_d2: float):
    """Best unit-modulus ``theta`` on the ``Q``-level phase grid for fixed powers."""
    _check_size(Q, eff.N, "phase")
    phases = phase_grid(Q)
    best_theta, best = None, -np.inf
    for idx in itertools.product(range(Q), repeat=eff.N):
        theta = phases[list(idx)]
        value = _sum_rate(p, theta, eff, sigma_d2)
        if value > best:
            best, best_theta = value, theta
    return best_theta, best


def brute_force_power(eff: EffectiveChannels, theta, levels: int, p_max: float, sigma_d2: float):
    """Best power vector on the uniform ``levels``-point grid of ``[0, p_max]`` per source."""
    _check_size(levels, eff.K, "power")
    grid = power_grid(levels, p_max)
    best_p, best = None, -np.inf
    for idx in itertools.product(range(levels), repeat=eff.K):
        p = grid[list(idx)]
        value = _sum_rate(p, theta, eff, sigma_d2)
        if value > best:
            best, best_p = value, p
    return best_p, best


def brute_force_joint(eff: EffectiveChannels, Q: int, levels: int, p_max: float, sigma_d2: float):
    """Exhaustive search over the product of the phase and power grids.

    Returns ``(theta_best, p_best, sum_rate_best)``.
    """
    if Q**eff.N * levels**eff.K > GRID_CAP:
        raise TooLargeError(
            f"joint grid has {Q}^{eff.N} x {levels}^{eff.K} points, cap is {GRID_CAP}"
        )
    best = (None, None, -np.inf)
    phases = phase_grid(Q)
    for idx in itertools.product(range(Q), repeat=eff.N):
        theta = phases[list(idx)]
        p, value = brute_force_power(eff, theta, levels, p_max, sigma_d2)
        if value > best[2]:
            best = (theta, p, value)
    return best


def finite_diff_check(
    fun: Callable[[np.ndarray], float],
    point,
    direction,
    step: float = 1e-5,
    scale: float | None = None,
) -> float:
    """Central-difference directional derivative of ``fun`` at ``point``, relative to ``scale``.

    At a claimed stationary point the result should be near zero. ``scale``
    defaults to ``max(|fun(point)|, tiny)``. Complex points and directions
    are fine as long as ``fun`` accepts them.
    """
    point = np.asarray(point)
    direction = np.asarray(direction)
    up = fun(point + step * direction)
    down = fun(point - step * direction)
    deriv = (up - down) / (2.0 * step)
    if scale is None:
        scale = abs(fun(point))
    return abs(deriv) / max(scale, np.finfo(float).tiny)


def check_monotone(trace, rel_slack: float = 1e-9):
    """``(passed, worst_drop)`` for a sequence of objective values or a trace object.

    ``worst_drop`` is the largest raw decrease between consecutive values
    (0 when nothing decreases).
    """
    values = np.asarray(getattr(trace, "f1_values", trace), dtype=float)
    if values.size == 0:
        raise ValueError("empty trace")
    prev, cur = values[:-1], values[1:]
    drops = prev - cur
    worst = float(max(0.0, drops.max())) if drops.size else 0.0
    passed = bool(np.all(drops <= rel_slack * np.abs(prev)))
    return passed, worst


def random_unit_phases(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random((count, n)))


def sampled_best(eff: EffectiveChannels, p, samples: Iterable[np.ndarray], sigma_d2: float) -> float:
    return max(_sum_rate(p, theta, eff, sigma_d2) for theta in samples)


def fraction_at_least(ratios: Sequence[float], threshold: float) -> float:
    ratios = np.asarray(ratios, dtype=float)
    return float(np.mean(ratios >= threshold))
