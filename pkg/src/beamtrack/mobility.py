"""AoA mobility models and the matching one-step posterior predictions.

All kernels act circularly on the grid so they stay doubly stochastic.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from .codebook import AngularGrid

BOUNDARIES = ("wrap", "reflect")
GAUSS_TRUNCATION = 6.0


@dataclass(frozen=True)
class Predictable:
    """Constant angular velocity of ``nu`` bins per slot."""

    nu: float = 0.0

    def drift(self, grid: AngularGrid) -> float:
        return self.nu * grid.width

    def variance(self, grid: AngularGrid) -> float:
        return 0.0


@dataclass(frozen=True)
class Gaussian:
    """Zero-mean Gaussian increments with variance ``sigma_phi_sq`` (deg^2)."""

    sigma_phi_sq: float = 0.75

    def __post_init__(self):
        if self.sigma_phi_sq < 0:
            raise ValueError("sigma_phi_sq must be non-negative")

    def drift(self, grid: AngularGrid) -> float:
        return 0.0

    def variance(self, grid: AngularGrid) -> float:
        return self.sigma_phi_sq


@dataclass(frozen=True)
class BernoulliJump:
    """Jump of ``beta`` bins with probability ``p`` per slot."""

    beta: int = 2
    p: float = 0.01

    def __post_init__(self):
        if int(self.beta) != self.beta:
            raise ValueError(f"beta must be an integer number of bins, got {self.beta}")
        if not 0 <= self.p <= 1:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        object.__setattr__(self, "beta", int(self.beta))

    @classmethod
    def from_degrees(cls, jump_deg: float, p: float, grid: AngularGrid) -> "BernoulliJump":
        """Round a jump size in degrees to the nearest whole number of bins."""
        return cls(int(round(jump_deg / grid.width)), p)

    def drift(self, grid: AngularGrid) -> float:
        return self.beta * grid.width * self.p

    def variance(self, grid: AngularGrid) -> float:
        b = self.beta * grid.width
        return b * b * self.p * (1 - self.p)


MobilityModel = Predictable | Gaussian | BernoulliJump


def fold_angle(angle: float, grid: AngularGrid, boundary: str) -> float:
    if boundary == "wrap":
        return float(grid.wrap(angle))
    if boundary == "reflect":
        # triangle wave with period 2 * span
        x = np.mod(angle - grid.lo, 2 * grid.span)
        return float(grid.lo + (x if x <= grid.span else 2 * grid.span - x))
    raise ValueError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")


def increment(model: MobilityModel, grid: AngularGrid, rng: np.random.Generator) -> tuple[float, bool]:
    """Random AoA increment in degrees, and whether a jump happened."""
    if isinstance(model, Predictable):
        return model.nu * grid.width, False
    if isinstance(model, Gaussian):
        return float(rng.normal(scale=np.sqrt(model.sigma_phi_sq))), False
    if isinstance(model, BernoulliJump):
        jumped = bool(rng.random() < model.p)
        return (model.beta * grid.width if jumped else 0.0), jumped
    raise TypeError(f"unknown mobility model {model!r}")


def step_aoa(model: MobilityModel, phi: float, rng: np.random.Generator, grid: AngularGrid,
             boundary: str = "wrap") -> float:
    """Advance the AoA one slot and fold it back into the grid range."""
    inc, _ = increment(model, grid, rng)
    return fold_angle(phi + inc, grid, boundary)


def predict_predictable(post, nu: float) -> np.ndarray:
    """Shift the posterior by ``nu`` bins (integer part then fractional part)."""
    post = np.asarray(post, dtype=float)
    whole = int(np.trunc(nu))
    frac = nu - whole
    out = np.roll(post, whole) if whole else post.copy()
    if frac:
        s = int(np.sign(frac))
        out = (1 - abs(frac)) * out + abs(frac) * np.roll(out, s)
    return out


@lru_cache(maxsize=64)
def gaussian_kernel(sigma_phi_sq: float, width: float) -> tuple[np.ndarray, np.ndarray]:
    """Quantized, truncated Gaussian pmf over bin offsets.

    Returns ``(offsets, weights)`` where ``weights[k]`` is the probability of
    moving ``offsets[k]`` bins, truncated at +-6 sigma and renormalized.
    """
    if sigma_phi_sq == 0:
        return np.array([0]), np.array([1.0])
    sigma = np.sqrt(sigma_phi_sq)
    cut = GAUSS_TRUNCATION * sigma
    m = int(np.ceil(cut / width + 0.5))
    offsets = np.arange(-m, m + 1)
    lo = np.clip((offsets - 0.5) * width, -cut, cut)
    hi = np.clip((offsets + 0.5) * width, -cut, cut)
    w = ndtr(hi / sigma) - ndtr(lo / sigma)
    keep = w > 0
    offsets, w = offsets[keep], w[keep]
    return offsets, w / w.sum()


def _circular_mix(post, offsets, weights) -> np.ndarray:
    n = post.size
    out = np.zeros(n)
    for o, wt in zip(offsets, weights):
        out += wt * np.roll(post, int(o) % n)
    return out


@lru_cache(maxsize=64)
def _gaussian_circulant(sigma_phi_sq: float, width: float, n: int) -> np.ndarray:
    offsets, weights = gaussian_kernel(sigma_phi_sq, width)
    return np.column_stack([_circular_mix(np.eye(n)[:, j], offsets, weights) for j in range(n)])


def predict_gaussian(post, sigma_phi_sq: float, grid: AngularGrid) -> np.ndarray:
    """Circular convolution of the posterior with the quantized Gaussian kernel."""
    post = np.asarray(post, dtype=float)
    return _gaussian_circulant(float(sigma_phi_sq), grid.width, post.size) @ post


def predict_bernoulli(post, beta: int, p: float) -> np.ndarray:
    post = np.asarray(post, dtype=float)
    return (1 - p) * post + p * np.roll(post, int(beta))


def predict(model: MobilityModel, post, grid: AngularGrid) -> np.ndarray:
    if isinstance(model, Predictable):
        return predict_predictable(post, model.nu)
    if isinstance(model, Gaussian):
        return predict_gaussian(post, model.sigma_phi_sq, grid)
    if isinstance(model, BernoulliJump):
        return predict_bernoulli(post, model.beta, model.p)
    raise TypeError(f"unknown mobility model {model!r}")


def transition_matrix(model: MobilityModel, grid: AngularGrid) -> np.ndarray:
    """Dense (n_bins, n_bins) matrix T with predict(post) == T @ post."""
    eye = np.eye(grid.n_bins)
    return np.column_stack([predict(model, eye[:, j], grid) for j in range(grid.n_bins)])
