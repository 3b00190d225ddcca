"""Follow one tracker through a single episode of random-walk motion.

The receiver starts knowing nothing about the AoA. The first handful of slots
are pilots that narrow the search with wide then finer beams; once the posterior is sharp
enough the tracker switches to data and only pilots again when the walk has
blurred its belief. Writes ``gain_vs_time.svg`` to the output directory.

    python demos/single_episode.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from beamtrack import ExperimentConfig, run_episode
from beamtrack.svgplot import Chart, render

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)

cfg = ExperimentConfig(mobility="gaussian", sigma_phi_sq=0.75, snr_db=10, gamma=0.03, horizon=300)
log = run_episode(cfg, episode=0)

first_data = int(np.flatnonzero(log.action == "D")[0])
print(f"initial acquisition: {first_data} pilots, levels {log.level[:first_data].tolist()}")
print(f"pilots over the episode: {int(log.pilot.sum())} of {len(log)}")
print(f"mean normalized gain: {log.gain_norm.mean():.3f}")
err = np.abs(log.phi_est - log.phi_true)
print(f"median |AoA error| after acquisition: {np.median(err[first_data:]):.2f} deg")

t = np.arange(1, len(log) + 1)
chart = Chart("one episode, random-walk AoA", "slot", "normalized gain", ylim=(0, 1.6))
chart.add("gain", t, log.gain_norm)
chart.add("pilot slots", t[log.pilot], np.full(log.pilot.sum(), 1.5), style="points")
(out / "gain_vs_time.svg").write_text(render(chart))
print(f"wrote {out / 'gain_vs_time.svg'}")
