"""Active beam tracking for a mobile angle of arrival.

A receiver with a uniform linear array tracks a moving AoA using a
hierarchical codebook. Each slot it picks the beam whose posterior coverage
is closest to one half, then decides between a pilot (learn the AoA) and
a data slot (earn spectral efficiency) by comparing mutual information with
weighted expected rate. Three classical trackers are included for comparison.
"""

__version__ = "0.1.0"

from .codebook import AngularGrid, Codebook, build_codebook
from .geometry import ArrayConfig, ChannelState, Observation, steering_vector
from .mobility import BernoulliJump, Gaussian, Predictable, predict
from .policy import MiTable, build_mi_table, decide_action, mi_data, mi_pilot, select_beam_hiepm
from .posterior import bayes_update, data_likelihood, pilot_likelihood
from .sim import ExperimentConfig, normalized_gain, run_episode, run_monte_carlo

__all__ = [
    "AngularGrid", "ArrayConfig", "BernoulliJump", "ChannelState", "Codebook", "ExperimentConfig",
    "Gaussian", "MiTable", "Observation", "Predictable", "bayes_update", "build_codebook",
    "build_mi_table", "data_likelihood", "decide_action", "mi_data", "mi_pilot", "normalized_gain",
    "pilot_likelihood", "predict", "run_episode", "run_monte_carlo", "select_beam_hiepm",
    "steering_vector",
]
