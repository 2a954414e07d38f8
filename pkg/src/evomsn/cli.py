"""Command-line entry point: ``evomsn {run,sweep,dump-stats,inspect-periods,generate}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .config import RunConfig, parse_config
from .errors import ConfigError, EvoMSNError
from .evaluation import SplitSpec, run_experiment, run_name, split, stats_dynamics_dump, sweep
from .ingest import load_csv, write_csv
from .series import window_arrays
from .spectral import extract_global_periods
from .synthetic import periodic_stream, regime_stream

log = logging.getLogger("evomsn")

CONFIG_FLAGS = [
    ("dataset", str), ("channels", str), ("lookback", int), ("horizon", int), ("k", int), ("eps", float),
    ("backbone", str), ("kernel_size", int), ("lr_stats", float), ("lr_backbone", float),
    ("weight_decay", float), ("epochs", int), ("batch_size", int), ("patience", int), ("seed", int),
    ("mode", str), ("variant", str), ("standardize", str), ("output_dir", str),
]


class UsageError(Exception):
    pass


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file (flat keys or [data]/[model]/[train]/[run] tables)")
    for name, kind in CONFIG_FLAGS:
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind, default=None)


def _config_from(args) -> RunConfig:
    overrides = {name: getattr(args, name) for name, _ in CONFIG_FLAGS}
    return parse_config(path=args.config, overrides=overrides, check_paths=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evomsn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="{run,sweep,dump-stats,inspect-periods,generate}")
    sub.required = True

    p = sub.add_parser("run", help="run one experiment")
    _add_config_flags(p)

    p = sub.add_parser("sweep", help="run a grid over k and/or horizon")
    _add_config_flags(p)
    p.add_argument("--ks", type=_int_list, default=[])
    p.add_argument("--horizons", type=_int_list, default=[])

    p = sub.add_parser("dump-stats", help="per-window mean/std tables for plotting")
    p.add_argument("--dataset", required=True)
    p.add_argument("--window-lengths", type=_int_list, default=[96, 48, 24])
    p.add_argument("--out", default="stats")

    p = sub.add_parser("inspect-periods", help="print the global period set of a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--lookback", type=int, default=96)
    p.add_argument("--horizon", type=int, default=96)
    p.add_argument("--json", action="store_true", help="emit JSON instead of a table")

    p = sub.add_parser("generate", help="write a synthetic benchmark stream as CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=["regime", "periodic"], default="regime")
    p.add_argument("--length", type=int, default=4000)
    p.add_argument("--periods", type=_int_list, default=[24, 12])
    p.add_argument("--channels", type=int, default=3)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_run(args) -> int:
    cfg = _config_from(args)
    report = run_experiment(cfg)
    target = Path(cfg.output_dir) / run_name(cfg)
    print(f"{report.label}: mse={report.mse:.6f} mae={report.mae:.6f} -> {target}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _config_from(args)
    series = load_csv(cfg.dataset)
    for rep in sweep(cfg, ks=args.ks, horizons=args.horizons, series=series):
        print(f"k={rep.config['k']} H={rep.config['horizon']} {rep.label}: mse={rep.mse:.6f} mae={rep.mae:.6f}")
    return 0


def _cmd_dump_stats(args) -> int:
    series = load_csv(args.dataset)
    tables = stats_dynamics_dump(series, args.window_lengths, out_dir=Path(args.out))
    for w, text in tables.items():
        print(f"window {w}: {text.count(chr(10)) - 1} rows -> {Path(args.out) / f'stats_w{w}.tsv'}")
    return 0


def _cmd_inspect(args) -> int:
    series = load_csv(args.dataset)
    L, H = args.lookback, args.horizon
    try:
        a, b = split(series, SplitSpec("online"), L, H)["warmup"]
    except EvoMSNError:
        a, b = 0, series.length
    xs, _ = window_arrays(series.values[a:b], L, H)
    periods = extract_global_periods(xs, args.k)
    if args.json:
        print(json.dumps(periods.to_dict(), sort_keys=True))
    else:
        print("rank\tperiod\tfrequency\tmean_amplitude")
        for i, (p, f, amp) in enumerate(zip(periods.periods, periods.frequencies, periods.mean_amplitudes), 1):
            print(f"{i}\t{p}\t{f}\t{amp:.6g}")
    return 0


def _cmd_generate(args) -> int:
    if args.kind == "regime":
        kw = {} if args.noise is None else {"noise": args.noise}
        series = regime_stream(T=args.length, periods=args.periods, n_channels=args.channels, seed=args.seed, **kw)
    else:
        amps = [1.0 / (i + 1) for i in range(len(args.periods))]
        series = periodic_stream(args.length, args.periods, amps, args.channels,
                                 noise=args.noise or 0.0, seed=args.seed)
    write_csv(series, args.out)
    print(f"wrote {series.length} rows x {series.n_channels} channels -> {args.out}")
    return 0


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "dump-stats": _cmd_dump_stats,
            "inspect-periods": _cmd_inspect, "generate": _cmd_generate}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"evomsn {args.command}: {exc}", file=sys.stderr)
        return 2
    except (EvoMSNError, OSError, KeyError, ValueError) as exc:
        print(f"evomsn {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
