"""How the exploration weight trades pilots for throughput.

Small gamma values make every slot a pilot: information always wins. As gamma
grows the expected rate term takes over and the pilot count falls until the
tracker stops probing almost entirely.

    python demos/gamma_tradeoff.py [n_episodes]
"""

import sys

from beamtrack import ExperimentConfig, run_monte_carlo

n = int(sys.argv[1]) if len(sys.argv) > 1 else 20
base = ExperimentConfig(mobility="gaussian", sigma_phi_sq=0.75, snr_db=10, horizon=500, n_episodes=n)

print(f"{'gamma':>7} {'pilots':>8} {'gain':>6} {'SE b/s/Hz':>10}")
for gamma in (0.001, 0.01, 0.03, 0.1, 0.3, 1.0):
    r = run_monte_carlo(base.replace(gamma=gamma))
    print(f"{gamma:7g} {r.mean('pilot_overhead'):8.1f} {r.mean('mean_normalized_gain'):6.3f} "
          f"{r.mean('mean_se'):10.2f}")
