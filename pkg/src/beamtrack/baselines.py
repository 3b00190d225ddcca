"""Comparison trackers: EKF tracking, dynamic pilot insertion and
neighbourhood scanning, all bootstrapped by an exhaustive beam sweep.

Each tracker exposes ``plan(t) -> (beam_id, action)`` and
``update(obs, phi_true)``. ``phi_true`` is only read by the exhaustive sweep
when it is configured to return perfect estimates.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .codebook import AngularGrid, Codebook
from .geometry import ChannelState, Observation, pilot_from_gain


# --------------------------------------------------------------------------
# exhaustive search


class ExhaustiveSweep:
    """Pilot sweep over every beam of one codebook level, one beam per slot."""

    def __init__(self, cb: Codebook, level: int, perfect: bool = True):
        if not 1 <= level <= cb.n_levels:
            raise ValueError(f"level must lie in 1..{cb.n_levels}")
        self.cb, self.level, self.perfect = cb, level, perfect
        self.duration = 2**level
        self.powers = []

    @property
    def done(self) -> bool:
        return len(self.powers) >= self.duration

    def next_beam(self) -> int:
        return self.cb.beam_id(self.level, len(self.powers) + 1)

    def record(self, obs: Observation):
        self.powers.append(abs(obs.value) ** 2)

    def estimate(self, phi_true: float) -> float:
        grid = self.cb.grid
        if self.perfect:
            return float(phi_true)
        best = self.cb.beam(self.level, int(np.argmax(self.powers)) + 1)
        return float(grid.centers[best.coverage_mask].mean())


def exhaustive_search(grid: AngularGrid, cb: Codebook, level: int, ch: ChannelState,
                      rng: np.random.Generator, perfect: bool = True) -> tuple[float, int]:
    """Sweep all ``2**level`` beams against a static channel.

    Returns ``(estimate, duration)``; with ``perfect`` the estimate is the
    true AoA at the end of the sweep.
    """
    sweep = ExhaustiveSweep(cb, level, perfect)
    while not sweep.done:
        bid = sweep.next_beam()
        sweep.record(pilot_from_gain(cb.response(bid, ch.aoa), ch.noise_var, rng))
    return sweep.estimate(ch.aoa), sweep.duration


# --------------------------------------------------------------------------
# EKF


@dataclass(frozen=True)
class EkfState:
    phi: float
    P: float
    reset: bool = False


def ekf_predict(state: EkfState, drift: float, q: float) -> EkfState:
    return replace(state, phi=state.phi + drift, P=state.P + q)


def ekf_update(state: EkfState, z, h, R, step: float) -> EkfState:
    """Scalar-state EKF update with measurement function ``h(phi) -> vector``.

    The Jacobian is a central finite difference with step ``step``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    hx = np.atleast_1d(h(state.phi))
    H = (np.atleast_1d(h(state.phi + step)) - np.atleast_1d(h(state.phi - step))) / (2 * step)
    S = state.P * np.outer(H, H) + R
    K = state.P * np.linalg.solve(S, H)
    phi = state.phi + float(K @ (z - hx))
    P = float(state.P * (1 - K @ H))
    return replace(state, phi=phi, P=P)


def measurement_model(obs_kind: str, gain_fn, sigma_sq: float):
    """(h, R) for a pilot (2-D real/imag) or data (received power) observation."""
    if obs_kind == "P":
        def h(phi):
            g = gain_fn(phi)
            return np.array([g.real, g.imag])
        return h, np.eye(2) * sigma_sq / 2

    def h_power(phi):
        return np.array([abs(gain_fn(phi)) ** 2 + sigma_sq])

    return h_power, None


def ekf_tracker_step(state: EkfState, obs: Observation, gain_fn, sigma_sq: float, *, drift: float,
                     q: float, step: float, threshold: float) -> EkfState:
    """Measurement update on ``obs``, then one-slot prediction.

    ``gain_fn(phi)`` is the complex gain of the beam used in this slot toward
    AoA ``phi``. The returned state has ``reset`` set when sqrt(P) of the
    prediction reaches ``threshold`` or the covariance is not finite.
    """
    h, R = measurement_model(obs.kind, gain_fn, sigma_sq)
    if obs.kind == "P":
        z = [complex(obs.value).real, complex(obs.value).imag]
    else:
        z = [float(obs.value)]
        g2 = abs(gain_fn(state.phi)) ** 2
        R = [[sigma_sq**2 + 2 * g2 * sigma_sq]]
    state = ekf_predict(ekf_update(state, z, h, R, step), drift, q)
    bad = not (np.isfinite(state.P) and np.isfinite(state.phi)) or state.P < 0
    return replace(state, reset=bad or np.sqrt(state.P) >= threshold)


class EkfTracker:
    """Finest beam pointed at the EKF estimate; sweep again when sqrt(MSE) >= threshold."""

    name = "ekf"

    def __init__(self, cb: Codebook, sigma_sq: float, drift: float, q: float, *,
                 mse_threshold_factor: float = 0.5, measurement: str = "power", perfect: bool = True):
        self.cb, self.grid, self.sigma_sq = cb, cb.grid, sigma_sq
        self.drift, self.q = drift, q
        self.threshold = mse_threshold_factor * self.grid.width  # finest beam width is one bin
        self.step = self.grid.width / 10
        self.kind = "P" if measurement == "pilot" else "D"
        self.perfect = perfect
        self.sweep = ExhaustiveSweep(cb, cb.n_levels, perfect)
        self.state = None
        self.beam_id = None
        self.resets = 0

    @property
    def estimate(self) -> float:
        return float("nan") if self.state is None else float(self.grid.wrap(self.state.phi))

    def plan(self, t):
        if self.sweep is not None:
            self.beam_id = self.sweep.next_beam()
            return self.beam_id, "P"
        b = self.grid.bin_index(self.grid.wrap(self.state.phi))
        self.beam_id = self.cb.covering_beam(self.cb.n_levels, b)
        return self.beam_id, self.kind

    def _gain_fn(self, bid):
        wrap, resp = self.grid.wrap, self.cb.response
        return lambda phi: resp(bid, float(wrap(phi)))

    def update(self, obs: Observation, phi_true: float):
        if self.sweep is not None:
            self.sweep.record(obs)
            if self.sweep.done:
                est = self.sweep.estimate(phi_true)
                self.state = EkfState(est + self.drift, self.grid.width**2 / 12 + self.q)
                self.sweep = None
            return
        self.state = ekf_tracker_step(self.state, obs, self._gain_fn(self.beam_id), self.sigma_sq,
                                      drift=self.drift, q=self.q, step=self.step, threshold=self.threshold)
        if self.state.reset:
            self.resets += 1
            self.sweep = ExhaustiveSweep(self.cb, self.cb.n_levels, self.perfect)


# --------------------------------------------------------------------------
# dynamic pilot insertion


@dataclass(frozen=True)
class PilotInsertionState:
    phi_anchor: float
    t_anchor: int
    velocity: float
    anchor_power: float
    window: tuple = ()
    trigger: bool = False

    def pointing(self, t: int) -> float:
        return self.phi_anchor + self.velocity * (t - self.t_anchor)


def pilot_insertion_step(state: PilotInsertionState, obs_power: float, p_min: float, sigma_sq: float,
                         window: int = 5) -> PilotInsertionState:
    """Push one received power into the sliding window and test the trigger.

    The normalized power is (window mean - noise power) / anchor power; it is
    only tested once the window is full.
    """
    win = (state.window + (float(obs_power),))[-window:]
    ratio = (np.mean(win) - sigma_sq) / state.anchor_power
    return replace(state, window=win, trigger=len(win) == window and ratio < p_min)


class PilotInsertionTracker:
    """Finest beam steered along the predicted trajectory from the last sweep."""

    name = "pilot_insertion"

    def __init__(self, cb: Codebook, sigma_sq: float, velocity: float, *, p_min: float = 0.5,
                 window: int = 5, perfect: bool = True):
        if not 0 < p_min <= 1:
            raise ValueError("p_min must lie in (0, 1]")
        self.cb, self.grid, self.sigma_sq = cb, cb.grid, sigma_sq
        self.velocity, self.p_min, self.window, self.perfect = velocity, p_min, window, perfect
        self.sweep = ExhaustiveSweep(cb, cb.n_levels, perfect)
        self.state = None
        self.t = 0
        self.resets = 0

    @property
    def estimate(self) -> float:
        return float("nan") if self.state is None else float(self.grid.wrap(self.state.pointing(self.t)))

    def plan(self, t):
        self.t = t
        if self.sweep is not None:
            return self.sweep.next_beam(), "P"
        b = self.grid.bin_index(self.grid.wrap(self.state.pointing(t)))
        return self.cb.covering_beam(self.cb.n_levels, b), "D"

    def update(self, obs: Observation, phi_true: float):
        if self.sweep is not None:
            self.sweep.record(obs)
            if self.sweep.done:
                est = self.sweep.estimate(phi_true)
                t0 = self.t + 1
                phi0 = float(self.grid.wrap(est + self.velocity))
                bid = self.cb.covering_beam(self.cb.n_levels, self.grid.bin_index(phi0))
                anchor = abs(self.cb.response(bid, phi0)) ** 2
                self.state = PilotInsertionState(phi0, t0, self.velocity, anchor)
                self.sweep = None
            return
        self.state = pilot_insertion_step(self.state, obs.value, self.p_min, self.sigma_sq, self.window)
        if self.state.trigger:
            self.resets += 1
            self.sweep = ExhaustiveSweep(self.cb, self.cb.n_levels, self.perfect)


# --------------------------------------------------------------------------
# neighbourhood scan


@dataclass(frozen=True)
class ScanState:
    beam: int  # 1-based index within the tracking level
    countdown: int  # data slots left before the next scan
    scan_powers: tuple = field(default=())


def scan_candidates(k: int, n_beams: int) -> tuple[int, int, int]:
    """Beams k-1, k, k+1 (1-based, circular)."""
    return ((k - 2) % n_beams) + 1, k, (k % n_beams) + 1


def neighborhood_scan_step(state: ScanState, tau_max: int, n_beams: int, obs_power: float | None = None):
    """Advance the data/scan schedule by one slot.

    Returns ``(state, beam_index, action)`` for the *next* slot. ``obs_power``
    is the pilot power measured in the slot just played when it was a scan
    slot; after the third scan slot the strongest neighbour becomes current.
    """
    if state.countdown > 0:
        state = replace(state, countdown=state.countdown - 1)
    elif obs_power is not None:
        powers = state.scan_powers + (obs_power,)
        if len(powers) == 3:
            cands = scan_candidates(state.beam, n_beams)
            state = ScanState(cands[int(np.argmax(powers))], tau_max)
        else:
            state = replace(state, scan_powers=powers)
    if state.countdown > 0:
        return state, state.beam, "D"
    return state, scan_candidates(state.beam, n_beams)[len(state.scan_powers)], "P"


class NeighborhoodScanTracker:
    """Fixed-level beam; every ``tau_max`` data slots, probe the two neighbours."""

    def __init__(self, cb: Codebook, level: int = 6, *, tau_max: int = 20, perfect: bool = True):
        if tau_max < 1:
            raise ValueError("tau_max must be >= 1")
        self.cb, self.level, self.tau_max = cb, level, tau_max
        self.name = f"scan{level}"
        self.n_beams = 2**level
        self.sweep = ExhaustiveSweep(cb, level, perfect)
        self.state = None
        self.next = None

    @property
    def estimate(self) -> float:
        if self.state is None:
            return float("nan")
        return float(self.cb.grid.centers[self.cb.beam(self.level, self.state.beam).coverage_mask].mean())

    def plan(self, t):
        if self.sweep is not None:
            return self.sweep.next_beam(), "P"
        k, action = self.next
        return self.cb.beam_id(self.level, k), action

    def update(self, obs: Observation, phi_true: float):
        if self.sweep is not None:
            self.sweep.record(obs)
            if self.sweep.done:
                est = self.sweep.estimate(phi_true)
                k = self.cb.grid.bin_index(est) // (self.cb.grid.n_bins // self.n_beams) + 1
                self.state = ScanState(int(k), self.tau_max)
                self.next = (self.state.beam, "D")
                self.sweep = None
            return
        power = abs(obs.value) ** 2 if obs.kind == "P" else None
        self.state, k, action = neighborhood_scan_step(self.state, self.tau_max, self.n_beams, power)
        self.next = (k, action)
