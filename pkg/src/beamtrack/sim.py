"""Episode runner, Monte Carlo aggregation and tracking metrics."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from functools import lru_cache

import numpy as np

from . import mobility as mob
from .baselines import EkfTracker, NeighborhoodScanTracker, PilotInsertionTracker
from .codebook import AngularGrid, Codebook, build_codebook
from .geometry import ArrayConfig, data_from_gain, pilot_from_gain
from .policy import MiTable, build_mi_table, decide_from_coverage, select_beam_id
from .posterior import bayes_update, uniform

ALGORITHMS = ("proposed", "ekf", "pilot_insertion", "scan5", "scan6")
BASELINES = ALGORITHMS[1:]
MOBILITY_KINDS = ("predictable", "gaussian", "bernoulli")


@dataclass(frozen=True)
class ExperimentConfig:
    # array and grid
    n_antennas: int = 32
    spacing_ratio: float = 0.5
    angle_min: float = -180.0
    angle_max: float = 0.0
    n_bins: int = 64
    codebook_mode: str = "pseudo_inverse"
    # mobility
    mobility: str = "gaussian"
    nu: float = 0.1
    sigma_phi_sq: float = 0.75
    jump_deg: float = 5.0
    jump_p: float = 0.01
    boundary: str = "wrap"
    init_min: float | None = None
    init_max: float | None = None
    # channel and policy
    snr_db: float = 10.0
    gamma: float = 0.03
    selection: str = "global"
    mi_table_n: int = 101
    # baselines
    algorithm: str = "proposed"
    ekf_mse_threshold_factor: float = 0.5
    ekf_measurement: str = "power"
    p_min: float = 0.5
    pi_window: int = 5
    tau_max: int = 20
    exhaustive_perfect: bool = True
    # run
    horizon: int = 500
    n_episodes: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon: must be >= 1")
        if self.n_episodes < 1:
            raise ValueError("n_episodes: must be >= 1")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm: must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.mobility not in MOBILITY_KINDS:
            raise ValueError(f"mobility: must be one of {MOBILITY_KINDS}, got {self.mobility!r}")
        if self.gamma < 0:
            raise ValueError("gamma: must be non-negative")
        if self.boundary not in mob.BOUNDARIES:
            raise ValueError(f"boundary: must be one of {mob.BOUNDARIES}")
        if self.ekf_measurement not in ("power", "pilot"):
            raise ValueError("ekf_measurement: must be 'power' or 'pilot'")

    @property
    def sigma_sq(self) -> float:
        return 10 ** (-self.snr_db / 10)

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))


@dataclass(frozen=True, eq=False)
class Scenario:
    """Immutable artefacts shared by every episode of a configuration."""

    array: ArrayConfig
    grid: AngularGrid
    codebook: Codebook
    model: mob.MobilityModel
    sigma_sq: float
    table: MiTable | None


def mobility_model(cfg: ExperimentConfig, grid: AngularGrid) -> mob.MobilityModel:
    if cfg.mobility == "predictable":
        return mob.Predictable(cfg.nu)
    if cfg.mobility == "gaussian":
        return mob.Gaussian(cfg.sigma_phi_sq)
    return mob.BernoulliJump.from_degrees(cfg.jump_deg, cfg.jump_p, grid)


@lru_cache(maxsize=16)
def _codebook(n_antennas, spacing_ratio, angle_min, angle_max, n_bins, mode):
    array = ArrayConfig(n_antennas, spacing_ratio, (angle_min, angle_max))
    grid = AngularGrid(n_bins, angle_min, angle_max)
    return build_codebook(array, grid, mode)


def build_scenario(cfg: ExperimentConfig) -> Scenario:
    cb = _codebook(cfg.n_antennas, cfg.spacing_ratio, cfg.angle_min, cfg.angle_max, cfg.n_bins,
                   cfg.codebook_mode)
    table = build_mi_table(cb, cfg.sigma_sq, cfg.mi_table_n) if cfg.algorithm == "proposed" else None
    return Scenario(cb.array, cb.grid, cb, mobility_model(cfg, cb.grid), cfg.sigma_sq, table)


def episode_rng(seed: int, episode: int) -> np.random.Generator:
    """Independent stream for episode ``episode``: SeedSequence([seed, episode])."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(episode)]))


# --------------------------------------------------------------------------
# trackers


class ProposedTracker:
    """Posterior-matching beam selection with MI/SE pilot allocation."""

    name = "proposed"

    def __init__(self, sc: Scenario, gamma: float, selection: str = "global"):
        self.sc, self.cb, self.gamma, self.selection = sc, sc.codebook, gamma, selection
        self.post = uniform(sc.grid.n_bins)  # pi(t|t-1)
        self.filtered = self.post
        self.decision = None
        self.beam_id = None

    @property
    def estimate(self) -> float:
        """Pointing direction of the selected beam (centre of its coverage)."""
        mask = self.cb.beams[self.beam_id].coverage_mask
        return float(self.sc.grid.centers[mask].mean())

    @property
    def map_estimate(self) -> float:
        return float(self.sc.grid.centers[int(np.argmax(self.filtered))])

    def plan(self, t):
        bid = select_beam_id(self.post, self.cb, self.selection)
        b = self.cb.beams[bid]
        pi_w = float(self.cb.masks[bid] @ self.post)
        self.decision = decide_from_coverage(pi_w, b.level, b.index, b.ideal_gain, self.gamma,
                                             self.sc.sigma_sq, self.sc.table)
        self.beam_id = bid
        return bid, self.decision.action

    def update(self, obs, phi_true):
        self.filtered = bayes_update(self.post, obs, self.cb.gains[self.beam_id], self.sc.sigma_sq)
        self.post = mob.predict(self.sc.model, self.filtered, self.sc.grid)


def make_tracker(cfg: ExperimentConfig, sc: Scenario):
    cb, grid = sc.codebook, sc.grid
    if cfg.algorithm == "proposed":
        return ProposedTracker(sc, cfg.gamma, cfg.selection)
    drift = sc.model.drift(grid)
    if cfg.algorithm == "ekf":
        return EkfTracker(cb, sc.sigma_sq, drift, sc.model.variance(grid),
                          mse_threshold_factor=cfg.ekf_mse_threshold_factor,
                          measurement=cfg.ekf_measurement, perfect=cfg.exhaustive_perfect)
    if cfg.algorithm == "pilot_insertion":
        return PilotInsertionTracker(cb, sc.sigma_sq, drift, p_min=cfg.p_min, window=cfg.pi_window,
                                     perfect=cfg.exhaustive_perfect)
    level = int(cfg.algorithm[-1])
    return NeighborhoodScanTracker(cb, level, tau_max=cfg.tau_max, perfect=cfg.exhaustive_perfect)


# --------------------------------------------------------------------------
# logs and metrics

LOG_COLUMNS = ("t", "action", "level", "index", "phi_true", "phi_est", "phi_map", "gain_raw",
               "gain_norm", "se_realized", "se_expected", "obs_re", "obs_im", "jump", "true_bin_mass")


@dataclass(eq=False)
class EpisodeLog:
    """Per-slot record of one episode; every field is a length-T array."""

    action: np.ndarray
    level: np.ndarray
    index: np.ndarray
    phi_true: np.ndarray
    phi_est: np.ndarray
    phi_map: np.ndarray
    gain_raw: np.ndarray
    gain_norm: np.ndarray
    se_realized: np.ndarray
    se_expected: np.ndarray
    obs_re: np.ndarray
    obs_im: np.ndarray
    jump: np.ndarray
    true_bin_mass: np.ndarray

    def __len__(self):
        return len(self.action)

    @property
    def pilot(self) -> np.ndarray:
        return self.action == "P"

    def rows(self):
        for t in range(len(self)):
            yield [t + 1] + [_fmt(getattr(self, c)[t]) for c in LOG_COLUMNS[1:]]

    def to_csv(self, fh, algorithm: str | None = None):
        w = csv.writer(fh, lineterminator="\n")
        cols = list(LOG_COLUMNS) if algorithm is None else ["algorithm", *LOG_COLUMNS]
        w.writerow(cols)
        for row in self.rows():
            w.writerow(row if algorithm is None else [algorithm, *row])

    def to_csv_string(self, algorithm: str | None = None) -> str:
        buf = io.StringIO()
        self.to_csv(buf, algorithm)
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (np.bool_, bool)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


@dataclass(frozen=True)
class Metrics:
    pilot_overhead: float
    mean_normalized_gain: float
    mean_raw_gain: float
    mean_se: float
    time_to_first_data: float

    def to_dict(self):
        return asdict(self)


def episode_metrics(log: EpisodeLog) -> Metrics:
    data = np.flatnonzero(~log.pilot)
    first = float(data[0] + 1) if data.size else float("inf")
    return Metrics(float(log.pilot.sum()), float(log.gain_norm.mean()), float(log.gain_raw.mean()),
                   float(log.se_realized.mean()), first)


def normalized_gain(cb: Codebook, beam_id: int, phi: float) -> float:
    """|w^H a(phi)|^2 relative to the finest beam covering phi."""
    ref = cb.covering_beam(cb.n_levels, cb.grid.bin_index(phi))
    g_ref = abs(cb.response(ref, phi)) ** 2
    return abs(cb.response(beam_id, phi)) ** 2 / g_ref


def recovery_times(log: EpisodeLog, threshold: float = 0.5, after: int = 0) -> list[int]:
    """Slots from each jump until the normalized gain exceeds ``threshold``.

    Only jumps landing at slot index >= ``after`` count. A jump the tracker
    never recovers from before the horizon counts the remaining slots.
    """
    good = log.gain_norm > threshold
    out = []
    for t in np.flatnonzero(log.jump):
        if t < after:
            continue
        hits = np.flatnonzero(good[t:])
        out.append(int(hits[0]) if hits.size else len(log) - int(t))
    return out


def pooled_recovery_times(logs, threshold: float = 0.5) -> list[int]:
    """Recovery times of every jump after each episode's first data slot."""
    out = []
    for log in logs:
        first = episode_metrics(log).time_to_first_data
        if np.isfinite(first):
            out.extend(recovery_times(log, threshold, after=int(first)))
    return out


# --------------------------------------------------------------------------
# episodes


def run_episode(cfg: ExperimentConfig, rng: np.random.Generator | None = None, episode: int = 0,
                scenario: Scenario | None = None) -> EpisodeLog:
    """Run one episode of ``cfg.horizon`` slots.

    Each slot: the tracker picks a beam and action, the channel produces a
    pilot or data observation, the tracker updates, and the AoA moves.
    Deterministic given ``rng`` (default: the stream for ``(cfg.seed, episode)``).
    """
    sc = scenario or build_scenario(cfg)
    rng = rng if rng is not None else episode_rng(cfg.seed, episode)
    cb, grid, s2, T = sc.codebook, sc.grid, sc.sigma_sq, cfg.horizon
    lo = grid.lo if cfg.init_min is None else cfg.init_min
    hi = grid.hi if cfg.init_max is None else cfg.init_max
    phi = float(rng.uniform(lo, hi))
    tracker = make_tracker(cfg, sc)
    proposed = isinstance(tracker, ProposedTracker)

    action = np.empty(T, dtype="<U1")
    level, index = np.zeros(T, dtype=int), np.zeros(T, dtype=int)
    jump = np.zeros(T, dtype=bool)
    cols = {k: np.zeros(T) for k in ("phi_true", "phi_est", "phi_map", "gain_raw", "gain_norm",
                                     "se_realized", "se_expected", "obs_re", "obs_im", "true_bin_mass")}
    for t in range(T):
        bid, act = tracker.plan(t)
        beam = cb.beams[bid]
        ref = cb.covering_beam(cb.n_levels, grid.bin_index(phi))
        g, g_ref = cb.responses((bid, ref), phi)
        obs = pilot_from_gain(g, s2, rng) if act == "P" else data_from_gain(g, s2, rng)
        tracker.update(obs, phi)

        action[t], level[t], index[t] = act, beam.level, beam.index
        cols["phi_true"][t] = phi
        cols["phi_est"][t] = tracker.estimate
        cols["gain_raw"][t] = abs(g) ** 2
        cols["gain_norm"][t] = abs(g) ** 2 / abs(g_ref) ** 2
        cols["se_realized"][t] = np.log2(1 + abs(g) ** 2 / s2) if act == "D" else 0.0
        cols["obs_re"][t] = complex(obs.value).real
        cols["obs_im"][t] = complex(obs.value).imag
        if proposed:
            cols["phi_map"][t] = tracker.map_estimate
            cols["se_expected"][t] = tracker.decision.se_value
            cols["true_bin_mass"][t] = tracker.filtered[grid.bin_index(phi)]
        else:
            cols["phi_map"][t] = np.nan
            cols["true_bin_mass"][t] = np.nan

        inc, jumped = mob.increment(sc.model, grid, rng)
        phi = mob.fold_angle(phi + inc, grid, cfg.boundary)
        if t + 1 < T:
            jump[t + 1] = jumped
    return EpisodeLog(action, level, index, jump=jump, **cols)


@dataclass(frozen=True)
class MonteCarloResult:
    config: ExperimentConfig
    episodes: tuple[Metrics, ...]

    @property
    def n(self) -> int:
        return len(self.episodes)

    def _values(self, name):
        return np.array([getattr(m, name) for m in self.episodes], dtype=float)

    def mean(self, name: str) -> float:
        return float(self._values(name).mean())

    def stderr(self, name: str) -> float:
        v = self._values(name)
        if v.size < 2:
            return 0.0
        if not np.isfinite(v).all():
            return float("nan")  # e.g. an episode that never sent data
        return float(v.std(ddof=1) / np.sqrt(v.size))

    def median(self, name: str) -> float:
        return float(np.median(self._values(name)))

    def summary(self) -> dict:
        names = [f.name for f in fields(Metrics)]
        return {
            "config": self.config.to_dict(),
            "n_episodes": self.n,
            "mean": {k: self.mean(k) for k in names},
            "stderr": {k: self.stderr(k) for k in names},
            "median": {k: self.median(k) for k in names},
        }

    def to_json(self) -> str:
        return dumps_json(self.summary())


def _finite(o):
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    if isinstance(o, float) and not np.isfinite(o):
        return None
    return o


def dumps_json(obj) -> str:
    """Stable JSON text; non-finite floats become null."""
    return json.dumps(_finite(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _run_one(args):
    cfg, episode = args
    return episode_metrics(run_episode(cfg, episode=episode))


def run_monte_carlo(cfg: ExperimentConfig, workers: int = 1, keep_logs: bool = False):
    """Run ``cfg.n_episodes`` independent episodes.

    Episode ``i`` always uses the stream for ``(cfg.seed, i)``, so results do
    not depend on ``workers`` and sweeps share random numbers across values.
    With ``keep_logs`` returns ``(result, logs)``.
    """
    jobs = [(cfg, i) for i in range(cfg.n_episodes)]
    if keep_logs:
        sc = build_scenario(cfg)
        logs = [run_episode(cfg, episode=i, scenario=sc) for i in range(cfg.n_episodes)]
        return MonteCarloResult(cfg, tuple(episode_metrics(l) for l in logs)), logs
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            metrics = tuple(ex.map(_run_one, jobs))
    else:
        sc = build_scenario(cfg)
        metrics = tuple(episode_metrics(run_episode(cfg, episode=i, scenario=sc)) for i in range(cfg.n_episodes))
    return MonteCarloResult(cfg, metrics)
