"""Sudden AoA jumps and how fast each tracker gets the beam back.

With rare 5 degree jumps the posterior tracker notices a data slot with
unexpectedly low power and usually re-centres within a slot or two. The
Kalman filter needs its error to build up before it resets, and the scan
baselines wait for their next scheduled sweep.

    python demos/jump_recovery.py [n_episodes]
"""

import sys

import numpy as np

from beamtrack import ExperimentConfig, run_monte_carlo
from beamtrack.sim import ALGORITHMS, pooled_recovery_times

n = int(sys.argv[1]) if len(sys.argv) > 1 else 20
base = ExperimentConfig(mobility="bernoulli", jump_deg=5.0, jump_p=0.01, snr_db=10, n_episodes=n)

print(f"{'tracker':>16} {'jumps':>6} {'median slots to recover':>24} {'gain':>6}")
for alg in ALGORITHMS:
    r, logs = run_monte_carlo(base.replace(algorithm=alg), keep_logs=True)
    rec = pooled_recovery_times(logs)
    med = f"{np.median(rec):g}" if rec else "n/a"
    print(f"{alg:>16} {len(rec):6d} {med:>24} {r.mean('mean_normalized_gain'):6.3f}")
