"""Array manifold, channel state and noisy observation synthesis for a ULA."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# QPSK symbols with unit modulus.
QPSK = np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))

_RANGE_TOL = 1e-9


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform linear array with ``n_antennas`` elements.

    ``spacing_ratio`` is d/lambda and ``angle_range`` the tracked AoA interval
    in degrees.
    """

    n_antennas: int = 32
    spacing_ratio: float = 0.5
    angle_range: tuple[float, float] = (-180.0, 0.0)

    def __post_init__(self):
        if int(self.n_antennas) != self.n_antennas or self.n_antennas < 2:
            raise ValueError(f"n_antennas must be an integer >= 2, got {self.n_antennas}")
        if not self.spacing_ratio > 0:
            raise ValueError(f"spacing_ratio must be positive, got {self.spacing_ratio}")
        lo, hi = self.angle_range
        if not lo < hi:
            raise ValueError(f"angle_range must satisfy min < max, got {self.angle_range}")
        object.__setattr__(self, "angle_range", (float(lo), float(hi)))


@dataclass(frozen=True)
class ChannelState:
    aoa: float
    noise_var: float
    path_gain: complex = 1.0 + 0.0j
    tx_power: float = 1.0

    def __post_init__(self):
        if not self.noise_var >= 0:
            raise ValueError(f"noise_var must be non-negative, got {self.noise_var}")

    @property
    def snr(self) -> float:
        return self.tx_power / self.noise_var


@dataclass(frozen=True)
class Observation:
    """Output of one beamforming slot.

    ``kind`` is ``"P"`` (pilot, complex value) or ``"D"`` (data, received
    power).
    """

    kind: str
    value: complex | float

    def __post_init__(self):
        if self.kind not in ("P", "D"):
            raise ValueError(f"kind must be 'P' or 'D', got {self.kind!r}")
        if self.kind == "D" and not (np.isreal(self.value) and self.value >= 0):
            raise ValueError(f"data power must be a non-negative real, got {self.value}")

    @property
    def pilot_value(self) -> complex:
        if self.kind != "P":
            raise AttributeError("data observations carry no pilot value")
        return complex(self.value)

    @property
    def data_power(self) -> float:
        if self.kind != "D":
            raise AttributeError("pilot observations carry no data power")
        return float(self.value)


def _check_range(cfg: ArrayConfig, aoa):
    lo, hi = cfg.angle_range
    aoa = np.asarray(aoa, dtype=float)
    if np.any(aoa < lo - _RANGE_TOL) or np.any(aoa > hi + _RANGE_TOL) or np.any(~np.isfinite(aoa)):
        raise ValueError(f"AoA outside angle range {cfg.angle_range}: {aoa}")
    return aoa


def steering_matrix(cfg: ArrayConfig, angles) -> np.ndarray:
    """Columns are steering vectors a(theta) for each angle in degrees, shape (N, M)."""
    angles = np.atleast_1d(_check_range(cfg, angles))
    n = np.arange(cfg.n_antennas)[:, None]
    phase = 2 * np.pi * cfg.spacing_ratio * n * np.cos(np.deg2rad(angles))[None, :]
    return np.exp(1j * phase) / np.sqrt(cfg.n_antennas)


def steering_vector(cfg: ArrayConfig, aoa: float) -> np.ndarray:
    """Unit-norm array response a(phi) for a single AoA in degrees.

    Entry n is exp(j 2 pi (d/lambda) n cos(phi)) / sqrt(N). Raises ValueError
    for angles outside ``cfg.angle_range``.
    """
    if np.ndim(aoa):
        return steering_matrix(cfg, aoa)[:, 0]
    # scalar fast path, used once per slot by the simulator
    x = float(aoa)
    lo, hi = cfg.angle_range
    if not (lo - _RANGE_TOL <= x <= hi + _RANGE_TOL):
        raise ValueError(f"AoA outside angle range {cfg.angle_range}: {x}")
    n = np.arange(cfg.n_antennas)
    return np.exp(1j * (2 * np.pi * cfg.spacing_ratio * math.cos(math.radians(x))) * n) / math.sqrt(cfg.n_antennas)


def _check_unit(w):
    w = np.asarray(w, dtype=complex)
    if abs(np.linalg.norm(w) - 1.0) > 1e-9:
        raise ValueError(f"beamforming vector must have unit norm, got {np.linalg.norm(w)}")
    return w


def complex_noise(noise_var: float, rng: np.random.Generator) -> complex:
    """One draw of CN(0, noise_var)."""
    if noise_var == 0:
        return 0j
    re, im = rng.normal(scale=np.sqrt(noise_var / 2), size=2)
    return complex(re, im)


def pilot_from_gain(gain: complex, noise_var: float, rng: np.random.Generator) -> Observation:
    return Observation("P", complex(gain) + complex_noise(noise_var, rng))


def data_from_gain(gain: complex, noise_var: float, rng: np.random.Generator) -> Observation:
    symbol = QPSK[rng.integers(4)]
    y = complex(gain) * symbol + complex_noise(noise_var, rng)
    return Observation("D", float(y.real**2 + y.imag**2))


def synthesize_pilot_observation(cfg: ArrayConfig, ch: ChannelState, w, rng) -> Observation:
    """Detected pilot Z(P) = w^H h + w^H n with known unit-energy symbol."""
    w = _check_unit(w)
    h = ch.path_gain * np.sqrt(ch.tx_power) * steering_vector(cfg, ch.aoa)
    return pilot_from_gain(np.vdot(w, h), ch.noise_var, rng)


def synthesize_data_observation(cfg: ArrayConfig, ch: ChannelState, w, rng) -> Observation:
    """Received power Z(D) = |w^H h x + w^H n|^2 for a random QPSK symbol x."""
    w = _check_unit(w)
    h = ch.path_gain * np.sqrt(ch.tx_power) * steering_vector(cfg, ch.aoa)
    return data_from_gain(np.vdot(w, h), ch.noise_var, rng)
