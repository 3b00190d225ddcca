"""Command line front end: ``beamtrack <subcommand> [options]``.

Subcommands
    simulate   Monte Carlo run; writes per-slot logs (CSV) and a metrics summary (JSON)
    sweep      vary one config key over several values; one CSV row per (value, algorithm)
    codebook   per-beam gain patterns as CSV
    mitable    build or inspect a mutual-information table file
    plot       SVG figures from simulate/sweep CSVs

Every data file starts with ``#`` comment lines holding the resolved config
and seed, so any output can be regenerated from its own header.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load_config, resolve_key
from .policy import MiTable, build_mi_table
from .sim import (ALGORITHMS, LOG_COLUMNS, ExperimentConfig, build_scenario, dumps_json,
                  pooled_recovery_times, run_monte_carlo)
from .svgplot import Chart, render

log = logging.getLogger("beamtrack")

SWEEP_METRICS = ("pilot_overhead", "mean_normalized_gain", "mean_raw_gain", "mean_se",
                 "time_to_first_data")
AXIS_ALIASES = {"gamma": "gamma", "snr": "snr_db"}


class CliError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers


def _config_json(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))


def header_lines(cfg: ExperimentConfig, **extra) -> list[str]:
    lines = [f"# generator: beamtrack {__version__}", f"# seed: {cfg.seed}"]
    lines += [f"# {k}: {v}" for k, v in extra.items()]
    lines.append(f"# config: {_config_json(cfg)}")
    return lines


def _write(path: Path, text: str, quiet: bool):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, newline="")
    if not quiet:
        print(f"wrote {path}", file=sys.stderr)


def _algorithms(arg: str | None, cfg: ExperimentConfig) -> list[str]:
    if not arg:
        return [cfg.algorithm]
    if arg == "all":
        return list(ALGORITHMS)
    algs = [a.strip() for a in arg.split(",") if a.strip()]
    bad = [a for a in algs if a not in ALGORITHMS]
    if bad:
        raise CliError(f"unknown algorithm {bad[0]!r}; choose from {', '.join(ALGORITHMS)}")
    return algs


def _resolved_config(args) -> ExperimentConfig:
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.episodes is not None:
        overrides.append(f"n_episodes={args.episodes}")
    cfg = load_config(args.config, overrides)
    try:
        build_scenario(cfg.replace(algorithm="ekf"))  # geometry errors surface here
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def read_csv(path) -> tuple[list[str], list[dict]]:
    """Comment header lines and data rows of a beamtrack CSV."""
    path = Path(path)
    if not path.is_file():
        raise CliError(f"input file not found: {path}")
    comments, body = [], []
    for line in path.read_text().splitlines(keepends=True):
        (comments if line.startswith("#") else body).append(line)
    reader = csv.DictReader(body)
    try:
        rows = list(reader)
    except csv.Error as exc:
        raise CliError(f"{path}: malformed CSV ({exc})") from None
    if not reader.fieldnames or not rows:
        raise CliError(f"{path}: no data rows")
    if any(None in r or None in r.values() for r in rows):
        raise CliError(f"{path}: malformed CSV (ragged rows)")
    return [c.rstrip("\n") for c in comments], rows


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    cfg = _resolved_config(args)
    algs = _algorithms(args.algorithms, cfg)
    out = Path(args.out)
    buf = io.StringIO()
    buf.write("\n".join(header_lines(cfg, algorithms=",".join(algs))) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["algorithm", "episode", *LOG_COLUMNS])
    summary = {"config": cfg.to_dict(), "seed": cfg.seed, "algorithms": {}}
    n_logged = min(args.log_episodes, cfg.n_episodes)
    for alg in algs:
        c = cfg.replace(algorithm=alg)
        log.info("simulate %s: %d episodes", alg, c.n_episodes)
        result, logs = run_monte_carlo(c, keep_logs=True)
        for ep, ep_log in enumerate(logs[:n_logged]):
            for row in ep_log.rows():
                writer.writerow([alg, ep, *row])
        s = result.summary()
        del s["config"]
        rec = pooled_recovery_times(logs)
        s["recovery"] = {"n_jumps": len(rec), "median": float(np.median(rec)) if rec else None,
                         "mean": float(np.mean(rec)) if rec else None}
        summary["algorithms"][alg] = s
    _write(out / "episodes.csv", buf.getvalue(), args.quiet)
    _write(out / "metrics.json", dumps_json(summary), args.quiet)
    return 0


def cmd_sweep(args) -> int:
    cfg = _resolved_config(args)
    algs = _algorithms(args.algorithms, cfg)
    field = AXIS_ALIASES.get(args.axis) or resolve_key(args.axis)
    raw = [v.strip() for v in args.values.split(",") if v.strip()]
    if len(raw) < 2:
        raise CliError("sweep needs at least two values")
    configs = [load_config(args.config, [*(args.set or []), f"{field}={v}",
                                         *([f"seed={args.seed}"] if args.seed is not None else []),
                                         *([f"n_episodes={args.episodes}"] if args.episodes is not None else [])])
               for v in raw]
    buf = io.StringIO()
    buf.write("\n".join(header_lines(cfg, axis=field, values=",".join(raw),
                                     algorithms=",".join(algs))) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = ["axis", "value", "algorithm", "n_episodes"]
    for m in SWEEP_METRICS:
        cols += [m, f"{m}_se"]
    cols += ["median_time_to_first_data", "median_recovery"]
    w.writerow(cols)
    for v, c in zip(raw, configs):
        for alg in algs:
            ca = c.replace(algorithm=alg)
            log.info("sweep %s=%s %s", field, v, alg)
            result, logs = run_monte_carlo(ca, keep_logs=True)
            rec = pooled_recovery_times(logs)
            row = [field, v, alg, result.n]
            for m in SWEEP_METRICS:
                row += [repr(result.mean(m)), repr(result.stderr(m))]
            row += [repr(result.median("time_to_first_data")), repr(float(np.median(rec))) if rec else ""]
            w.writerow(row)
    _write(Path(args.out) / "sweep.csv", buf.getvalue(), args.quiet)
    return 0


def cmd_codebook(args) -> int:
    cfg = _resolved_config(args)
    cb = build_scenario(cfg.replace(algorithm="ekf")).codebook
    buf = io.StringIO()
    buf.write("\n".join(header_lines(cfg, codebook_mode=cb.mode,
                                     condition_number=repr(cb.condition_number))) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "index", "bin", "gain_sq", "phase"])
    for level, index, b, g2, ph in cb.gain_pattern_rows():
        w.writerow([level, index, b, repr(g2), repr(ph)])
    _write(Path(args.out) / "codebook.csv", buf.getvalue(), args.quiet)
    return 0


def mitable_filename(cfg: ExperimentConfig) -> str:
    return f"mitable_N{cfg.n_antennas}_D{cfg.n_bins}_snr{cfg.snr_db:g}dB_n{cfg.mi_table_n}.csv"


def cmd_mitable(args) -> int:
    if args.action == "inspect":
        if not args.path:
            raise CliError("mitable inspect needs a table file")
        path = Path(args.path)
        if not path.is_file():
            raise CliError(f"table file not found: {path}")
        try:
            table = MiTable.from_csv(path)
        except ValueError as exc:
            raise CliError(str(exc)) from None
        v = table.values
        pil, dat = v[0], v[1]
        report = {
            "file": str(path),
            "sigma_sq": table.sigma_sq,
            "levels": table.n_levels,
            "n_pi": int(table.pis.size),
            "max_mi_nats": float(v.max()),
            "min_mi_nats": float(v.min()),
            "within_0_ln2": bool(v.min() >= 0 and v.max() <= np.log(2) + 1e-6),
            "endpoints_zero": bool(np.all(np.abs(v[:, :, [0, -1]]) <= 1e-6)),
            "max_data_minus_pilot": float((dat - pil).max()),
            "peak_pilot_mi_per_level": [float(x) for x in pil.max(axis=1)],
            "peak_data_mi_per_level": [float(x) for x in dat.max(axis=1)],
        }
        print(dumps_json(report), end="")
        return 0
    cfg = _resolved_config(args)
    cb = build_scenario(cfg.replace(algorithm="ekf")).codebook
    table = build_mi_table(cb, cfg.sigma_sq, cfg.mi_table_n)
    path = Path(args.path) if args.path else Path(args.out) / mitable_filename(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"generator": f"beamtrack {__version__}", "n_antennas": cfg.n_antennas,
              "n_bins": cfg.n_bins, "snr_db": cfg.snr_db, "n": cfg.mi_table_n,
              "config": _config_json(cfg)}
    table.to_csv(path, header)
    if not args.quiet:
        print(f"wrote {path}", file=sys.stderr)
    return 0


def _plot_log(comments, rows, out: Path, quiet: bool):
    comment = "\n".join(c[2:] for c in comments)
    # first logged episode of each algorithm
    first_ep = rows[0].get("episode")
    by_alg: dict[str, list[dict]] = {}
    for r in rows:
        if r.get("episode") == first_ep:
            by_alg.setdefault(r.get("algorithm", "run"), []).append(r)

    def col(rs, name):
        return np.array([float(r[name]) if r[name] not in ("", "nan") else np.nan for r in rs])

    gain = Chart("Normalized beamforming gain", "slot", "normalized gain")
    trace = Chart("AoA trace", "slot", "angle (deg)")
    first = True
    for alg, rs in by_alg.items():
        t = col(rs, "t")
        gain.add(alg, t, col(rs, "gain_norm"))
        if first:
            trace.add("true AoA", t, col(rs, "phi_true"))
            first = False
        trace.add(f"{alg} estimate", t, col(rs, "phi_est"))
        pilot = np.array([r["action"] == "P" for r in rs])
        trace.add(f"{alg} pilot slots", t[pilot], col(rs, "phi_est")[pilot], style="points")
    _write(out / "gain_vs_time.svg", render(gain, comment), quiet)
    _write(out / "aoa_trace.svg", render(trace, comment), quiet)


def _plot_sweep(comments, rows, out: Path, quiet: bool):
    comment = "\n".join(c[2:] for c in comments)
    axis = rows[0]["axis"]
    logx = axis == "gamma" and all(float(r["value"]) > 0 for r in rows)
    for metric in ("pilot_overhead", "mean_normalized_gain", "mean_se"):
        ch = Chart(f"{metric} vs {axis}", axis, metric, logx=logx)
        algs = list(dict.fromkeys(r["algorithm"] for r in rows))
        for alg in algs:
            rs = sorted((r for r in rows if r["algorithm"] == alg), key=lambda r: float(r["value"]))
            ch.add(alg, [float(r["value"]) for r in rs], [float(r[metric]) for r in rs],
                   errors=[float(r[f"{metric}_se"]) for r in rs])
        _write(out / f"sweep_{metric}.svg", render(ch, comment), quiet)


def cmd_plot(args) -> int:
    out = Path(args.out)
    for path in args.inputs:
        comments, rows = read_csv(path)
        keys = set(rows[0])
        if {"t", "gain_norm", "phi_true", "phi_est", "action"} <= keys:
            sub = out if len(args.inputs) == 1 else out / Path(path).stem
            try:
                _plot_log(comments, rows, sub, args.quiet)
            except (KeyError, ValueError) as exc:
                raise CliError(f"{path}: malformed log CSV ({exc})") from None
        elif {"axis", "value", "algorithm"} <= keys:
            sub = out if len(args.inputs) == 1 else out / Path(path).stem
            try:
                _plot_sweep(comments, rows, sub, args.quiet)
            except (KeyError, ValueError) as exc:
                raise CliError(f"{path}: malformed sweep CSV ({exc})") from None
        else:
            raise CliError(f"{path}: not a simulate or sweep CSV")
    return 0


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file (defaults are built in)")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key, e.g. policy.gamma=0.01 (repeatable)")
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--episodes", type=int, help="number of Monte Carlo episodes")
    common.add_argument("--quiet", action="store_true", help="no progress output")

    p = argparse.ArgumentParser(prog="beamtrack", description="Active mmWave beam tracking simulator.")
    p.add_argument("--version", action="version", version=f"beamtrack {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run episodes, write log CSV and metrics JSON")
    s.add_argument("--algorithms", help=f"comma list or 'all' ({', '.join(ALGORITHMS)})")
    s.add_argument("--log-episodes", type=int, default=1,
                   help="number of episodes whose per-slot log is written (default 1)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", parents=[common], help="sweep one config key")
    s.add_argument("--axis", default="gamma", help="gamma, snr, or any config key")
    s.add_argument("--values", required=True, help="comma-separated values (at least two)")
    s.add_argument("--algorithms", help="comma list or 'all'")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("codebook", parents=[common], help="export beam gain patterns")
    s.set_defaults(func=cmd_codebook)

    s = sub.add_parser("mitable", parents=[common], help="build or inspect an MI table file")
    s.add_argument("action", choices=("build", "inspect"))
    s.add_argument("path", nargs="?", help="table file (inspect: required; build: optional target)")
    s.set_defaults(func=cmd_mitable)

    s = sub.add_parser("plot", parents=[common], help="SVG plots from simulate/sweep CSVs")
    s.add_argument("inputs", nargs="+", help="episodes.csv or sweep.csv files")
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, CliError) as exc:
        print(f"beamtrack: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
