"""The three compared schemes, run on identical channels and phase seeds."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .channel import EffectiveChannels, Scenario
from .fp import SolverOptions, _initial_point, run_blocks
from .rates import rates, sinr

SCHEMES = ("joint", "power_only", "phase_only")


def run_scheme(
    scheme: str,
    eff: EffectiveChannels,
    scenario: Scenario,
    options: Optional[SolverOptions] = None,
):
    """Returns ``(state, rate_report, trace)``.

    ``power_only`` freezes the seeded random phases that ``joint`` and
    ``phase_only`` start from; ``phase_only`` freezes every power at the cap.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    options = options or SolverOptions()
    p0, theta0 = _initial_point(scenario, eff, options)
    if scheme == "phase_only":
        p0 = np.full(eff.K, float(scenario.p_max))
    state, trace = run_blocks(
        eff,
        scenario.p_max,
        scenario.sigma_d2,
        p0,
        theta0,
        options,
        optimize_power=scheme != "phase_only",
        optimize_phase=scheme != "power_only",
    )
    report = rates(sinr(state.p, state.theta, eff, scenario.sigma_d2))
    return state, report, trace
