"""Network geometry, large-scale path loss and Rayleigh-fading channels.

Indexing conventions used throughout the package:

* ``h[l]`` has shape ``(K, M_l)``; ``h[l][k]`` is the channel from source ``k``
  to IRS ``l``.
* ``g[l]`` has shape ``(K, M_l)``; ``g[l][k]`` is the channel from IRS ``l`` to
  destination ``k``.
* ``v[i, k]`` (shape ``(K, K, N)``) is the cascaded channel from source ``i``
  to destination ``k`` such that ``theta.conj() @ v[i, k]`` equals
  ``sum_l g[l][k].conj() @ diag(theta_l.conj()) @ h[l][i]``.
* ``C[k]`` (shape ``(K, N, N)``) is the covariance of the IRS-reflected noise
  seen at destination ``k``.

All powers and gains are linear. Decibels appear only in :func:`path_loss`
and :func:`pmax_from_snr`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

NOISE_MODES = ("expectation", "realization")
SNR_REFERENCES = ("cascade", "transmit")

Point = tuple[float, float]

DEFAULT_IRS_POSITIONS: tuple[Point, ...] = (
    (100.0, 50.0),
    (100.0, -50.0),
    (200.0, 50.0),
    (200.0, -50.0),
)


@dataclass(frozen=True)
class Disk:
    center: Point = (0.0, 0.0)
    radius: float = 50.0


@dataclass(frozen=True)
class Rectangle:
    x: tuple[float, float] = (50.0, 250.0)
    y: tuple[float, float] = (-60.0, 60.0)


@dataclass(frozen=True)
class Scenario:
    """Geometry and physical constants of one network instance.

    ``irs_positions=None`` means IRSs are drawn uniformly from ``irs_region``
    for every layout sample. ``p_max=None`` resolves to the 35 dB operating
    point of the cascade SNR reference (see :func:`pmax_from_snr`).
    """

    K: int = 6
    L: int = 4
    M: tuple[int, ...] = (4, 4, 4, 4)
    source_region: Disk = Disk((0.0, 0.0), 50.0)
    dest_region: Disk = Disk((300.0, 0.0), 50.0)
    irs_positions: Optional[tuple[Point, ...]] = DEFAULT_IRS_POSITIONS
    irs_region: Rectangle = Rectangle()
    T0_db: float = 30.0
    d0: float = 1.0
    rho_si: float = 2.2
    rho_id: float = 2.8
    sigma_r2: float = 0.01
    sigma_d2: float = 0.01
    p_max: Optional[float] = field(default=None)

    def __post_init__(self):
        M = self.M
        if isinstance(M, (int, np.integer)):
            M = (int(M),) * int(self.L)
        object.__setattr__(self, "M", tuple(int(m) for m in M))
        if self.irs_positions is not None:
            object.__setattr__(
                self,
                "irs_positions",
                tuple((float(x), float(y)) for x, y in self.irs_positions),
            )
        self.validate()
        if self.p_max is None:
            object.__setattr__(self, "p_max", pmax_from_snr(35.0, self, "cascade"))
        if not self.p_max > 0:
            raise ValueError("p_max must be positive")

    def validate(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if len(self.M) != self.L:
            raise ValueError(f"M must list {self.L} element counts, got {len(self.M)}")
        if any(m < 1 for m in self.M):
            raise ValueError("M: every IRS needs at least one element")
        if self.irs_positions is not None and len(self.irs_positions) != self.L:
            raise ValueError(
                f"irs_positions has {len(self.irs_positions)} entries but L={self.L}"
            )
        for name in ("sigma_r2", "sigma_d2", "d0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for region in (self.source_region, self.dest_region):
            if region.radius < 0:
                raise ValueError("disk radius must be nonnegative")
        if self.irs_region.x[0] > self.irs_region.x[1] or self.irs_region.y[0] > self.irs_region.y[1]:
            raise ValueError("irs_region bounds must be ordered (low, high)")

    @property
    def N(self) -> int:
        return sum(self.M)

    @property
    def offsets(self) -> np.ndarray:
        """Start index of each IRS block inside the length-N stacked vector."""
        return np.concatenate([[0], np.cumsum(self.M)])


@dataclass(frozen=True)
class Layout:
    sources: np.ndarray  # (K, 2)
    destinations: np.ndarray  # (K, 2)
    irs: np.ndarray  # (L, 2)


@dataclass(frozen=True)
class ChannelRealization:
    h: tuple[np.ndarray, ...]
    g: tuple[np.ndarray, ...]
    seed: int
    noise_draw: Optional[np.ndarray] = None  # (K, N), rows are z_k


@dataclass(frozen=True)
class EffectiveChannels:
    v: np.ndarray  # (K, K, N)
    C: np.ndarray  # (K, N, N)

    @property
    def K(self) -> int:
        return self.v.shape[0]

    @property
    def N(self) -> int:
        return self.v.shape[2]


def path_loss(d, T0_db: float, d0: float, rho: float):
    """Large-scale gain ``10**(-T0_db/10) * (d/d0)**(-rho)``."""
    d = np.asarray(d, dtype=float)
    if d0 <= 0 or np.any(d <= 0):
        raise ValueError("path_loss needs positive distances")
    out = 10.0 ** (-T0_db / 10.0) * (d / d0) ** (-rho)
    return float(out) if out.ndim == 0 else out


def reference_gain(scenario: Scenario) -> float:
    """Single-element cascaded gain through the midpoint of the two disk centers."""
    src = np.asarray(scenario.source_region.center, dtype=float)
    dst = np.asarray(scenario.dest_region.center, dtype=float)
    half = max(np.linalg.norm(dst - src) / 2.0, scenario.d0)
    return path_loss(half, scenario.T0_db, scenario.d0, scenario.rho_si) * path_loss(
        half, scenario.T0_db, scenario.d0, scenario.rho_id
    )


def pmax_from_snr(snr_db: float, scenario: Scenario, reference: str = "cascade") -> float:
    """Per-source power cap for an SNR operating point.

    ``transmit``: ``SNR = p_max / sigma_d2``.
    ``cascade``: ``SNR = p_max * G_ref / sigma_d2`` with ``G_ref`` from
    :func:`reference_gain`, i.e. the per-element received SNR of the IRS path.
    """
    if reference not in SNR_REFERENCES:
        raise ValueError(f"unknown SNR reference {reference!r}")
    p = scenario.sigma_d2 * 10.0 ** (snr_db / 10.0)
    if reference == "cascade":
        p /= reference_gain(scenario)
    return p


def _uniform_disk(rng: np.random.Generator, disk: Disk, n: int) -> np.ndarray:
    r = disk.radius * np.sqrt(rng.random(n))
    phi = 2.0 * np.pi * rng.random(n)
    cx, cy = disk.center
    return np.column_stack([cx + r * np.cos(phi), cy + r * np.sin(phi)])


def sample_layout(scenario: Scenario, seed: int) -> Layout:
    rng = np.random.default_rng([int(seed), 0])
    sources = _uniform_disk(rng, scenario.source_region, scenario.K)
    destinations = _uniform_disk(rng, scenario.dest_region, scenario.K)
    if scenario.irs_positions is not None:
        irs = np.array(scenario.irs_positions, dtype=float)
    else:
        box = scenario.irs_region
        irs = np.column_stack(
            [rng.uniform(*box.x, size=scenario.L), rng.uniform(*box.y, size=scenario.L)]
        )
    return Layout(sources, destinations, irs)


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circular complex Gaussian; real and imaginary parts each have variance var/2."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # floor at d0-scale to keep co-located points finite
    return np.maximum(np.linalg.norm(a - b, axis=-1), 1e-9)


def sample_channels(
    scenario: Scenario, layout: Layout, seed: int, with_noise: bool = False
) -> ChannelRealization:
    rng = np.random.default_rng([int(seed), 1])
    h, g = [], []
    for l, M_l in enumerate(scenario.M):
        d_si = _distance(layout.sources, layout.irs[l])
        d_id = _distance(layout.destinations, layout.irs[l])
        k_si = path_loss(d_si, scenario.T0_db, scenario.d0, scenario.rho_si)
        k_id = path_loss(d_id, scenario.T0_db, scenario.d0, scenario.rho_id)
        h.append(np.sqrt(k_si)[:, None] * complex_normal(rng, (scenario.K, M_l)))
        g.append(np.sqrt(k_id)[:, None] * complex_normal(rng, (scenario.K, M_l)))
    noise = None
    if with_noise:
        n = complex_normal(rng, scenario.N, scenario.sigma_r2)
        noise = n[None, :] * np.concatenate(g, axis=1).conj()
    return ChannelRealization(tuple(h), tuple(g), int(seed), noise)


def assemble_effective(
    real: ChannelRealization, noise_mode: str = "expectation", sigma_r2: float = 0.01
) -> EffectiveChannels:
    if noise_mode not in NOISE_MODES:
        raise ValueError(f"unknown noise mode {noise_mode!r}")
    H = np.concatenate(real.h, axis=1)  # (K, N), row i: source i
    G = np.concatenate(real.g, axis=1)  # (K, N), row k: destination k
    v = H[:, None, :] * G[None, :, :].conj()
    if noise_mode == "expectation":
        C = np.zeros((G.shape[0], G.shape[1], G.shape[1]), dtype=complex)
        idx = np.arange(G.shape[1])
        C[:, idx, idx] = sigma_r2 * np.abs(G) ** 2
    else:
        if real.noise_draw is None:
            raise ValueError("realization noise mode needs a channel realization with noise_draw")
        z = real.noise_draw
        C = z[:, :, None] * z[:, None, :].conj()
        C = 0.5 * (C + C.conj().transpose(0, 2, 1))
    return EffectiveChannels(v, C)


def cascade_per_irs(real: ChannelRealization, theta: np.ndarray, i: int, k: int) -> complex:
    """Direct ``sum_l g_{k,l}^H Theta_l h_{l,i}`` with ``Theta_l = diag(conj(theta_l))``.

    theta stacks the conjugated reflection coefficients, matching the
    ``theta^H v`` convention of :class:`EffectiveChannels`.
    """
    total = 0j
    start = 0
    for h_l, g_l in zip(real.h, real.g):
        m = h_l.shape[1]
        Theta = np.diag(theta[start:start + m].conj())
        total += g_l[k].conj() @ Theta @ h_l[i]
        start += m
    return total


def draw_instance(
    scenario: Scenario, seed: int, noise_mode: str = "expectation"
) -> tuple[Layout, ChannelRealization, EffectiveChannels]:
    """Layout, fading and effective channels for one Monte-Carlo trial."""
    layout = sample_layout(scenario, seed)
    real = sample_channels(scenario, layout, seed, with_noise=noise_mode == "realization")
    return layout, real, assemble_effective(real, noise_mode, scenario.sigma_r2)


def random_phases(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random(n))


def as_points(values: Sequence[Sequence[float]]) -> tuple[Point, ...]:
    return tuple((float(x), float(y)) for x, y in values)
