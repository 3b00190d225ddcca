"""Beam selection and pilot/data allocation.

Mutual information of the two observation kinds is computed under ideal
beams, where the in-coverage gain of a level-``l`` beam is ``G_l`` and the
observation is a two-component mixture weighted by the coverage probability.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import i0e

from .codebook import Codebook, coverage_probability, ideal_gain

log = logging.getLogger(__name__)

PILOT_NODES = 801
DATA_NODES = 4001
REFINE_TOL = 1e-3
TIE_TOL = 1e-12
KINDS = ("P", "D")


class QuadratureError(RuntimeError):
    def __init__(self, what: str, residual: float):
        super().__init__(f"{what}: refinement moved the result by {residual:.3g} nats")
        self.residual = residual


# --------------------------------------------------------------------------
# beam selection


def _hiepm_global(cov: np.ndarray, levels: np.ndarray) -> int:
    dist = np.abs(cov - 0.5)
    cands = np.flatnonzero(dist <= dist.min() + TIE_TOL)
    # ties: finest level, then the beam holding more mass (a point mass ties
    # every beam at distance 1/2), then the lowest index; beams are stored by
    # ascending (level, index) so argmax keeps the first
    cands = cands[levels[cands] == levels[cands].max()]
    return int(cands[np.argmax(cov[cands] > cov[cands].max() - TIE_TOL)])


def _hiepm_descent(cov: np.ndarray, cb: Codebook) -> int:
    level, k = 1, 1 + int(np.argmax(cov[[cb.beam_id(1, 1), cb.beam_id(1, 2)]]))
    while level < cb.n_levels:
        kids = [cb.beam_id(level + 1, 2 * k - 1), cb.beam_id(level + 1, 2 * k)]
        best = kids[int(np.argmax(cov[kids]))]
        if cov[best] >= 0.5:
            level, k = level + 1, cb.beams[best].index
            continue
        here = cb.beam_id(level, k)
        if abs(cov[best] - 0.5) <= abs(cov[here] - 0.5) + TIE_TOL:
            return best
        return here
    return cb.beam_id(level, k)


def select_beam_id(post, cb: Codebook, rule: str = "global") -> int:
    cov = cb.masks @ np.asarray(post, dtype=float)
    if rule == "global":
        return _hiepm_global(cov, cb.levels)
    if rule == "descent":
        return _hiepm_descent(cov, cb)
    raise ValueError(f"unknown selection rule {rule!r}")


def select_beam_hiepm(post, cb: Codebook, rule: str = "global") -> tuple[int, int]:
    """Beam whose coverage probability is closest to 1/2.

    ``rule="global"`` searches every beam of every level, breaking ties toward
    the finer level, then the larger coverage, then the lower index. ``rule="descent"`` walks down
    the tree and only compares a node with its best child.
    Returns ``(level, index)``.
    """
    b = cb.beams[select_beam_id(post, cb, rule)]
    return b.level, b.index


# --------------------------------------------------------------------------
# quadrature helpers


def _nodes(intervals, n_total: int) -> np.ndarray:
    """Piecewise-uniform nodes: merge overlapping intervals, ``n_total`` points split evenly.

    Each interval is the support of one mixture component, so every component
    is resolved at the same relative density however far apart they sit.
    """
    merged = []
    for a, b in sorted(intervals):
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    per = max(3, n_total // len(merged))
    return np.concatenate([np.linspace(a, b, per) for a, b in merged])


def _neg_entropy_terms(logf: np.ndarray, x: np.ndarray):
    """Trapezoid integrals of f and f log f along the last axis."""
    f = np.exp(logf)
    return np.trapezoid(f, x, axis=-1), np.trapezoid(f * logf, x, axis=-1)


def _log_normal(x, mean, var):
    return -0.5 * np.log(2 * np.pi * var) - (x - mean) ** 2 / (2 * var)


def _mi_pilot_grid(pis: np.ndarray, gain_abs: float, sigma_sq: float, n_nodes: int) -> np.ndarray:
    sigma = np.sqrt(sigma_sq)
    s = 8 * sigma
    xr = _nodes([(-s, s), (gain_abs - s, gain_abs + s)], n_nodes)
    xi = np.linspace(-s, s, n_nodes)
    half = sigma_sq / 2
    # the mixture only differs along the real axis; the imaginary part is the
    # same N(0, s2/2) for both components, so the tensor trapezoid factorizes
    lg1 = _log_normal(xr, gain_abs, half)
    lg0 = _log_normal(xr, 0.0, half)
    pis = np.asarray(pis, dtype=float)[:, None]
    with np.errstate(divide="ignore"):
        logfx = np.logaddexp(np.log(pis) + lg1, np.log1p(-pis) + lg0)
    mass_x, flogf_x = _neg_entropy_terms(logfx, xr)
    mass_y, flogf_y = _neg_entropy_terms(_log_normal(xi, 0.0, half), xi)
    h = -(mass_y * flogf_x + mass_x * flogf_y)
    return h - np.log(np.pi * np.e * sigma_sq)


def _data_nodes(gain_abs: float, sigma_sq: float, n_nodes: int) -> np.ndarray:
    g2 = gain_abs**2
    mean = g2 + sigma_sq
    sd = np.sqrt(sigma_sq**2 + 2 * g2 * sigma_sq)
    lam = 2 * g2 / sigma_sq
    upper = max(sigma_sq * (lam / 2 + 40), mean + 12 * sd)
    return _nodes([(0.0, 40 * sigma_sq), (max(0.0, mean - 12 * sd), upper)], n_nodes)


def _log_chi2(x, g2, sigma_sq):
    y = 2.0 * np.sqrt(x * g2) / sigma_sq
    return -np.log(sigma_sq) - (x + g2) / sigma_sq + np.log(i0e(y)) + y


def _mi_data_grid(pis: np.ndarray, gain_abs: float, sigma_sq: float, n_nodes: int) -> np.ndarray:
    x = _data_nodes(gain_abs, sigma_sq, n_nodes)
    lc1 = _log_chi2(x, gain_abs**2, sigma_sq)
    lc0 = -np.log(sigma_sq) - x / sigma_sq
    pis = np.asarray(pis, dtype=float)[:, None]
    with np.errstate(divide="ignore"):
        logf = np.logaddexp(np.log(pis) + lc1, np.log1p(-pis) + lc0)
    _, flogf = _neg_entropy_terms(logf, x)
    _, flogf1 = _neg_entropy_terms(lc1, x)
    _, flogf0 = _neg_entropy_terms(lc0, x)
    p = pis[:, 0]
    h_mix = -flogf
    h_cond = -(p * flogf1 + (1 - p) * flogf0)
    return h_mix - h_cond


def binary_entropy(p) -> np.ndarray:
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log(p) + (1 - p) * np.log1p(-p))
    return np.nan_to_num(h, nan=0.0)


def _checked(fn, what, pis, gain_abs, sigma_sq, n_nodes):
    coarse = fn(pis, gain_abs, sigma_sq, n_nodes)
    fine = fn(pis, gain_abs, sigma_sq, 2 * n_nodes - 1)
    residual = float(np.max(np.abs(fine - coarse)))
    if not np.isfinite(residual) or residual >= REFINE_TOL:
        raise QuadratureError(what, residual)
    # the observation depends on the AoA only through the coverage indicator,
    # so 0 <= I <= h(pi); quadrature error near either end is clipped away
    return np.clip(coarse, 0.0, binary_entropy(pis))


def mi_pilot(pi_w, gain, sigma_sq: float, n_nodes: int = PILOT_NODES):
    """I(AoA; Z(P)) in nats for a beam covering mass ``pi_w`` with gain ``gain``.

    h(Z) of the complex Gaussian mixture minus log(pi e sigma^2), by tensor
    trapezoid quadrature on a box of +-8 sigma around each component.
    Accepts scalar or array ``pi_w``. Raises QuadratureError if doubling the
    node count moves the result by 1e-3 nats or more.
    """
    pis = np.atleast_1d(np.asarray(pi_w, dtype=float))
    out = _checked(_mi_pilot_grid, "pilot MI", pis, abs(gain), sigma_sq, n_nodes)
    return float(out[0]) if np.ndim(pi_w) == 0 else out


def mi_data(pi_w, gain, sigma_sq: float, n_nodes: int = DATA_NODES):
    """I(AoA; Z(D)) in nats: entropy of the chi-squared mixture minus the
    coverage-weighted entropies of its two components, same quadrature for all
    three integrals."""
    pis = np.atleast_1d(np.asarray(pi_w, dtype=float))
    out = _checked(_mi_data_grid, "data MI", pis, abs(gain), sigma_sq, n_nodes)
    return float(out[0]) if np.ndim(pi_w) == 0 else out


def spectral_efficiency(pi_w: float, gain, sigma_sq: float, action: str) -> float:
    """Expected spectral efficiency in bits/s/Hz; zero on pilot slots."""
    if action == "P":
        return 0.0
    return float(pi_w * np.log2(1 + abs(gain) ** 2 / sigma_sq))


# --------------------------------------------------------------------------
# MI table


@dataclass(frozen=True, eq=False)
class MiTable:
    """Pilot and data MI per codebook level on a uniform grid of coverage probabilities.

    ``values[k, l - 1, j]`` holds the MI for kind ``KINDS[k]``, level ``l``
    and probability ``pis[j]``.
    """

    pis: np.ndarray
    values: np.ndarray
    sigma_sq: float

    @property
    def n_levels(self) -> int:
        return self.values.shape[1]

    def lookup(self, kind: str, level: int, pi_w: float) -> float:
        row = self.values[KINDS.index(kind), level - 1]
        return float(np.interp(pi_w, self.pis, row))

    def rows(self):
        for k, kind in enumerate(KINDS):
            for l in range(self.n_levels):
                for p, v in zip(self.pis, self.values[k, l]):
                    yield kind, l + 1, float(p), float(v)

    def to_csv(self, path, header: dict | None = None):
        path = Path(path)
        with path.open("w", newline="") as fh:
            for key, val in (header or {}).items():
                fh.write(f"# {key}: {val}\n")
            fh.write(f"# sigma_sq: {self.sigma_sq!r}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kind", "level", "pi", "mi_nats"])
            for kind, level, p, v in self.rows():
                w.writerow([kind, level, repr(p), repr(v)])

    @classmethod
    def from_csv(cls, path) -> "MiTable":
        sigma_sq = None
        body = []
        with open(path, newline="") as fh:
            for line in fh:
                if line.startswith("#"):
                    key, _, val = line[1:].partition(":")
                    if key.strip() == "sigma_sq":
                        sigma_sq = float(val)
                else:
                    body.append(line)
        rows = list(csv.DictReader(body))
        if not rows or sigma_sq is None:
            raise ValueError(f"{path}: not an MI table file")
        pis = np.unique([float(r["pi"]) for r in rows])
        n_levels = max(int(r["level"]) for r in rows)
        values = np.full((2, n_levels, pis.size), np.nan)
        for r in rows:
            j = np.searchsorted(pis, float(r["pi"]))
            values[KINDS.index(r["kind"]), int(r["level"]) - 1, j] = float(r["mi_nats"])
        if np.isnan(values).any():
            raise ValueError(f"{path}: incomplete MI table")
        return cls(pis, values, sigma_sq)


@lru_cache(maxsize=32)
def _cached_table(n_levels: int, sigma_sq: float, n: int) -> MiTable:
    pis = np.linspace(0.0, 1.0, n)
    values = np.empty((2, n_levels, n))
    for l in range(1, n_levels + 1):
        g = ideal_gain(l, n_levels)
        values[0, l - 1] = mi_pilot(pis, g, sigma_sq)
        values[1, l - 1] = mi_data(pis, g, sigma_sq)
    # mixture with a single component carries no information
    values[:, :, 0] = 0.0
    values[:, :, -1] = 0.0
    return MiTable(pis, values, sigma_sq)


def build_mi_table(cb: Codebook | int, sigma_sq: float, n: int = 101) -> MiTable:
    """Offline MI table over ``n`` uniform coverage probabilities per level.

    Uses the ideal gains G_l of the codebook's levels. Results are memoised
    per (levels, sigma_sq, n).
    """
    if n < 11:
        raise ValueError("MI table needs at least 11 probability points")
    n_levels = cb if isinstance(cb, int) else cb.n_levels
    return _cached_table(int(n_levels), float(sigma_sq), int(n))


# --------------------------------------------------------------------------
# pilot / data decision


@dataclass(frozen=True)
class ActionDecision:
    action: str
    beam: tuple[int, int]
    pi_w: float
    mi_value: float  # nats, MI of the chosen action
    se_value: float  # bits/s/Hz, expected SE of the chosen action
    score_p: float
    score_d: float


def decide_action(post, beam, gamma: float, sigma_sq: float, table: MiTable | None = None) -> ActionDecision:
    """Pick pilot or data by comparing I_P against I_D + gamma * S.

    Both scores are in nats (spectral efficiency converted with ln).
    Ties go to data. Without a table the MI terms are integrated on the spot.
    """
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    pi_w = coverage_probability(post, beam)
    return decide_from_coverage(pi_w, beam.level, beam.index, beam.ideal_gain, gamma, sigma_sq, table)


def decide_from_coverage(pi_w: float, level: int, index: int, g_l: float, gamma: float,
                         sigma_sq: float, table: MiTable | None = None) -> ActionDecision:
    pi_w = min(max(pi_w, 0.0), 1.0)
    if table is None:
        log.warning("no MI table supplied; integrating MI online")
        i_p = mi_pilot(pi_w, g_l, sigma_sq)
        i_d = mi_data(pi_w, g_l, sigma_sq)
    else:
        i_p = table.lookup("P", level, pi_w)
        i_d = table.lookup("D", level, pi_w)
    se_nats = pi_w * np.log1p(g_l**2 / sigma_sq)
    score_p = i_p
    score_d = i_d + gamma * se_nats
    if score_d >= score_p:
        return ActionDecision("D", (level, index), pi_w, i_d, se_nats / np.log(2), score_p, score_d)
    return ActionDecision("P", (level, index), pi_w, i_p, 0.0, score_p, score_d)
