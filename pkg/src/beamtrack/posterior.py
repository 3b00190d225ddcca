"""Discrete Bayesian belief over the AoA grid.

Posteriors are plain 1-D probability arrays over the grid bins. Updates are
done in the log domain: at 20 dB a few dozen pilots already push likelihood
ratios past the double range.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.special import i0e

from .codebook import AngularGrid
from .geometry import Observation

log = logging.getLogger(__name__)

LIKELIHOOD_FLOOR = 1e-300
_LOG_FLOOR = np.log(LIKELIHOOD_FLOOR)


def uniform(n_bins: int) -> np.ndarray:
    return np.full(n_bins, 1.0 / n_bins)


def log_pilot_likelihood(xi, gain, sigma_sq):
    """log of the CN(gain, sigma_sq) density at ``xi``."""
    d = np.asarray(xi) - np.asarray(gain)
    return -np.log(np.pi * sigma_sq) - (d.real**2 + d.imag**2) / sigma_sq


def pilot_likelihood(xi, gain, sigma_sq):
    """Complex Gaussian density (1/(pi s2)) exp(-|xi - gain|^2 / s2)."""
    return np.exp(log_pilot_likelihood(xi, gain, sigma_sq))


def log_data_likelihood(xi, gain, sigma_sq):
    """log of the scaled non-central chi-squared (k=2) density of the received power.

    Non-centrality is lambda = 2|gain|^2 / sigma_sq and the series
    sum_k z^k/(k!)^2 is evaluated as I0(2 sqrt(z)) with an exponentially
    scaled Bessel function.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise ValueError("received power must be non-negative")
    g2 = np.abs(gain) ** 2
    y = 2.0 * np.sqrt(xi * g2) / sigma_sq
    return -np.log(sigma_sq) - (xi + g2) / sigma_sq + np.log(i0e(y)) + y


def data_likelihood(xi, gain, sigma_sq):
    return np.exp(log_data_likelihood(xi, gain, sigma_sq))


def log_likelihoods(obs: Observation, bin_gains, sigma_sq: float) -> np.ndarray:
    """Per-bin log-likelihood of an observation given each bin's beam gain."""
    if sigma_sq <= 0:
        raise ValueError("sigma_sq must be positive")
    if obs.kind == "P":
        return log_pilot_likelihood(complex(obs.value), bin_gains, sigma_sq)
    return log_data_likelihood(float(obs.value), bin_gains, sigma_sq)


def bayes_update(prior, obs: Observation, bin_gains, sigma_sq: float) -> np.ndarray:
    """Posterior pi(t|t) from pi(t|t-1) and one observation.

    Likelihoods are scaled by their maximum over the support of the prior and
    floored at 1e-300 relative to it before the product, so the result never
    collapses to an all-zero vector.
    """
    prior = np.asarray(prior, dtype=float)
    loglik = log_likelihoods(obs, bin_gains, sigma_sq)
    support = prior > 0
    if not support.any():
        log.warning("prior has no support; returning it unchanged")
        return prior.copy()
    # bins off the support carry zero prior mass; capping at 0 keeps 0 * exp() finite
    rel = np.clip(loglik - loglik[support].max(), _LOG_FLOOR, 0.0)
    post = prior * np.exp(rel)
    total = post.sum()
    if not np.isfinite(total) or total <= 0:
        log.warning("Bayes update degenerate (total=%r); keeping prior", total)
        return prior.copy()
    return post / total


def bayes_update_linear(prior, obs: Observation, bin_gains, sigma_sq: float) -> np.ndarray:
    """Same update computed directly on densities, for moderate SNR checks."""
    prior = np.asarray(prior, dtype=float)
    lik = np.maximum(np.exp(log_likelihoods(obs, bin_gains, sigma_sq)), LIKELIHOOD_FLOOR)
    post = prior * lik
    return post / post.sum()


def map_estimate(post, grid: AngularGrid) -> float:
    """Centre of the most probable bin; ties go to the lowest index."""
    return float(grid.centers[int(np.argmax(post))])
