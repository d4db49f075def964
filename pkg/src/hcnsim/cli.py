"""Command-line front end: run sweeps, validate configs, self-check.

Exit status: 0 on success, 1 on a failed oracle suite or runtime error,
2 on a configuration problem (the message names the offending field),
130 when a sweep is interrupted (completed rows are flushed first).
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from .association import SchemeKind
from .config import ConfigError, RunConfig, default_config, echo_toml, load_config, with_overrides
from .oracle import run_oracle_suite
from .report import emit_plot_data, render_figures, write_metrics_csv
from .simulation import resolve_threads, run_sweep, sweep_cells
from .topology import LayoutError, build_layout


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hcnsim",
        description="Monte Carlo sweeps over a heterogeneous cellular network "
                    "with energy-harvesting small cells.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a sweep and write results")
    run.add_argument("config_path", nargs="?", default=None,
                     help="TOML configuration file (defaults apply if omitted)")
    run.add_argument("--config", dest="config_flag", default=None,
                     help="alternative way to pass the configuration file")
    run.add_argument("--samples", type=int, default=None,
                     help="Monte Carlo samples per sweep cell")
    run.add_argument("--seed", type=int, default=None, help="master seed")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--threads", type=int, default=None,
                     help="worker processes (0 = one per CPU; "
                          "falls back to HCN_SIM_THREADS)")
    run.add_argument("--scheme", action="append", default=None,
                     metavar="NAME", help="restrict to a scheme "
                     "(nearest_bs, joint, proposed_joint); repeatable")
    run.add_argument("--deterministic-fading", action="store_true", default=None,
                     help="freeze every channel gain at 1")

    val = sub.add_parser("validate", help="check a configuration without running")
    val.add_argument("config_path", help="TOML configuration file")

    orc = sub.add_parser("oracle", help="run the brute-force self-check suite")
    orc.add_argument("--instances", type=int, default=500,
                     help="random small instances per check")
    orc.add_argument("--seed", type=int, default=0)
    return parser


def _load(path: str | None) -> RunConfig:
    return load_config(path) if path else default_config()


def _threads_override(args_threads: int | None) -> int | None:
    if args_threads is not None:
        return args_threads
    env = os.environ.get("HCN_SIM_THREADS")
    if env is None or env == "":
        return None
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"HCN_SIM_THREADS: expected an integer, got {env!r}") from None


def _cmd_run(args) -> int:
    if args.config_path and args.config_flag:
        print("error: pass the config either positionally or via --config, not both",
              file=sys.stderr)
        return 2
    try:
        cfg = _load(args.config_path or args.config_flag)
        schemes = None
        if args.scheme:
            parsed = [SchemeKind.from_label(s) for s in args.scheme]
            schemes = tuple(dict.fromkeys(parsed))
        cfg = with_overrides(
            cfg, samples=args.samples, seed=args.seed,
            threads=_threads_override(args.threads), schemes=schemes,
            deterministic_fading=args.deterministic_fading, out_dir=args.out)
        layout = build_layout(cfg.layout)
    except (ConfigError, LayoutError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out_dir = cfg.output.directory
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.echo.toml"), "w", newline="") as fh:
        fh.write(echo_toml(cfg))

    n_cells = len(sweep_cells(cfg))
    print(f"sweep: {n_cells} cells x {cfg.sweep.n_samples} samples, "
          f"{layout.n_bs} BSs, {resolve_threads(cfg.sweep.threads)} worker(s)",
          file=sys.stderr)
    rows = []
    t0 = time.time()

    def progress(row) -> None:
        rows.append(row)
        print(f"  [{len(rows):>3}/{n_cells}] {row.scheme.label:<14} "
              f"lambda={row.lambda_e:g} density={row.density:g} "
              f"grid={row.grid_power_w:.1f} W rate={row.sum_rate_bps:.3e} bps",
              file=sys.stderr)

    interrupted = False
    try:
        run_sweep(cfg, progress=progress)
    except KeyboardInterrupt:
        interrupted = True
        print("interrupted; flushing completed cells", file=sys.stderr)

    csv_path = os.path.join(out_dir, "metrics.csv")
    write_metrics_csv(rows, csv_path)
    written = [csv_path]
    if rows and not interrupted:
        if "plots" in cfg.output.formats:
            written += emit_plot_data(rows, out_dir)
        if "figures" in cfg.output.formats:
            written += render_figures(rows, out_dir)
    print(f"wrote {', '.join(os.path.basename(p) for p in written)} to {out_dir} "
          f"in {time.time() - t0:.1f} s", file=sys.stderr)
    return 130 if interrupted else 0


def _cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config_path)
        build_layout(cfg.layout)
    except (ConfigError, LayoutError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 2
    print(f"ok: {args.config_path}")
    return 0


def _cmd_oracle(args) -> int:
    ok = run_oracle_suite(n_instances=args.instances, seed=args.seed)
    return 0 if ok else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "validate":
        return _cmd_validate(args)
    return _cmd_oracle(args)


if __name__ == "__main__":
    raise SystemExit(main())
