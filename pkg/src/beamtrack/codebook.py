"""Hierarchical multi-resolution beamforming codebook.

Level ``l`` holds ``2**l`` beams whose coverage masks tile the angular grid.
Two flavours are available: ``"pseudo_inverse"`` beams are least-squares fits
of the 0/1 coverage pattern on the grid, ``"ideal"`` beams deliver exactly
``G_l`` inside their coverage and nothing outside.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import ArrayConfig, steering_matrix, steering_vector

log = logging.getLogger(__name__)

MODES = ("pseudo_inverse", "ideal")
PINV_RCOND = 1e-8


@dataclass(frozen=True)
class AngularGrid:
    """``n_bins`` equal-width bins partitioning ``[lo, hi]`` (degrees)."""

    n_bins: int = 64
    lo: float = -180.0
    hi: float = 0.0

    def __post_init__(self):
        if self.n_bins < 1:
            raise ValueError("n_bins must be positive")
        if not self.lo < self.hi:
            raise ValueError("grid requires lo < hi")

    @classmethod
    def for_array(cls, cfg: ArrayConfig, n_bins: int = 64) -> "AngularGrid":
        return cls(n_bins, *cfg.angle_range)

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.n_bins

    @cached_property
    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.n_bins) + 0.5) * self.width

    @property
    def span(self) -> float:
        return self.hi - self.lo

    def bin_index(self, angle):
        """0-based bin containing ``angle``; the right edge belongs to the last bin."""
        if np.ndim(angle) == 0:
            return min(max(math.floor((float(angle) - self.lo) / self.width), 0), self.n_bins - 1)
        idx = np.floor((np.asarray(angle, dtype=float) - self.lo) / self.width).astype(int)
        return np.clip(idx, 0, self.n_bins - 1)

    def wrap(self, angle):
        return self.lo + np.mod(np.asarray(angle, dtype=float) - self.lo, self.span)


@dataclass(frozen=True, eq=False)
class Beam:
    level: int
    index: int  # 1-based within the level
    weights: np.ndarray
    coverage_mask: np.ndarray
    bin_gains: np.ndarray
    ideal_gain: float

    @property
    def width_bins(self) -> int:
        return int(self.coverage_mask.sum())


def ideal_gain(level: int, n_levels: int) -> float:
    """In-coverage gain magnitude G_l of an ideal level-``level`` beam.

    Anchored so the finest level has |G_S|^2 = 1; each coarser level halves
    the power, |G_l|^2 = 2**(l - S).
    """
    if not 1 <= level <= n_levels:
        raise ValueError(f"level must lie in 1..{n_levels}, got {level}")
    return float(np.sqrt(2.0 ** (level - n_levels)))


def coverage_probability(post, beam) -> float:
    """Posterior mass inside the beam's coverage mask."""
    mask = beam.coverage_mask if isinstance(beam, Beam) else np.asarray(beam)
    return float(np.dot(mask, post))


@dataclass(frozen=True, eq=False)
class Codebook:
    array: ArrayConfig
    grid: AngularGrid
    mode: str
    beams: tuple[Beam, ...]
    condition_number: float = float("nan")
    _lookup: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._lookup.update({(b.level, b.index): i for i, b in enumerate(self.beams)})

    @property
    def n_levels(self) -> int:
        return int(np.log2(self.grid.n_bins))

    @cached_property
    def masks(self) -> np.ndarray:
        """(n_beams, n_bins) float array of coverage masks."""
        return np.array([b.coverage_mask for b in self.beams], dtype=float)

    @cached_property
    def gains(self) -> np.ndarray:
        """(n_beams, n_bins) complex per-bin gains w^H a(theta_i)."""
        return np.array([b.bin_gains for b in self.beams])

    @cached_property
    def levels(self) -> np.ndarray:
        return np.array([b.level for b in self.beams])

    @cached_property
    def indices(self) -> np.ndarray:
        return np.array([b.index for b in self.beams])

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([b.weights for b in self.beams])

    @cached_property
    def ideal_gains(self) -> np.ndarray:
        return np.array([b.ideal_gain for b in self.beams])

    def beam_id(self, level: int, index: int) -> int:
        try:
            return self._lookup[(level, index)]
        except KeyError:
            raise KeyError(f"no beam at level {level}, index {index}") from None

    def beam(self, level: int, index: int) -> Beam:
        return self.beams[self.beam_id(level, index)]

    def covering_beam(self, level: int, bin_idx: int) -> int:
        """Id of the level-``level`` beam whose mask contains ``bin_idx`` (0-based)."""
        per = self.grid.n_bins >> level
        return self.beam_id(level, int(bin_idx) // per + 1)

    def response(self, beam_id: int, aoa: float) -> complex:
        """Complex gain w^H a(aoa) of a beam towards a continuous AoA."""
        b = self.beams[beam_id]
        if self.mode == "ideal":
            return complex(b.ideal_gain * b.coverage_mask[self.grid.bin_index(aoa)])
        return complex(np.vdot(b.weights, steering_vector(self.array, aoa)))

    def responses(self, beam_ids, aoa: float) -> np.ndarray:
        """Complex gains of several beams towards one AoA."""
        ids = np.asarray(beam_ids, dtype=int)
        if self.mode == "ideal":
            return self.ideal_gains[ids] * self.masks[ids, self.grid.bin_index(aoa)]
        return self.weights[ids].conj() @ steering_vector(self.array, aoa)

    def gain_pattern_rows(self):
        """Rows (level, index, bin, |gain|^2, phase) for every beam and bin."""
        for b in self.beams:
            for i, g in enumerate(b.bin_gains):
                yield b.level, b.index, i + 1, float(abs(g) ** 2), float(np.angle(g))


def build_codebook(cfg: ArrayConfig, grid: AngularGrid, mode: str = "pseudo_inverse") -> Codebook:
    """Build all ``S = log2(n_bins)`` levels of the hierarchical codebook.

    Pseudo-inverse beams solve ``w = (A A^H)^+ A g`` with ``A`` the steering
    matrix on the bin centres and ``g`` the beam's 0/1 coverage mask, then are
    scaled to unit norm. Singular values below ``1e-8 * s_max`` are dropped.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    n_bins = grid.n_bins
    n_levels = int(round(np.log2(n_bins)))
    if 2**n_levels != n_bins:
        raise ValueError(f"n_bins must be a power of two, got {n_bins}")
    if cfg.n_antennas > n_bins:
        log.warning("N=%d exceeds grid size %d", cfg.n_antennas, n_bins)

    A = steering_matrix(cfg, grid.centers)
    gram = A @ A.conj().T
    sv = np.linalg.svd(gram, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if cond > 1 / PINV_RCOND:
        log.warning("A A^H is ill-conditioned (cond=%.3g); truncating small singular values", cond)
    projector = np.linalg.pinv(gram, rcond=PINV_RCOND, hermitian=True) @ A

    beams = []
    for level in range(1, n_levels + 1):
        per = n_bins >> level
        g_l = ideal_gain(level, n_levels)
        for k in range(2**level):
            mask = np.zeros(n_bins, dtype=bool)
            mask[k * per:(k + 1) * per] = True
            w = projector @ mask.astype(float)
            w = w / np.linalg.norm(w)
            if mode == "ideal":
                gains = g_l * mask.astype(complex)
            else:
                gains = w.conj() @ A
            beams.append(Beam(level, k + 1, w, mask, gains, g_l))
    return Codebook(cfg, grid, mode, tuple(beams), cond)
