"""Command-line front end.

Subcommands: run, sweep, dispatch, validate, plotdata. Exit codes: 0 on
success, 1 on usage/validation errors, 2 on runtime faults.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, apply_overrides, load_config_dict
from .dispatch import InfeasibleDispatch, QuadCost, economic_dispatch
from .harness import read_trace, run_scenario, sweep_weights, write_trace
from .plant import SimulationFault

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _load_cfg(path: str, overrides: list[str]):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config document: {exc}") from exc
    if overrides:
        doc = apply_overrides(doc, overrides)
    return load_config_dict(doc)


def _write_metrics(metrics, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metrics.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_validate(args) -> int:
    _load_cfg(args.config, args.set)
    print(f"{args.config}: OK")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _load_cfg(args.config, args.set)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.plant_trace:
        with open(out / "plant_trace.csv", "w", encoding="utf-8", newline="") as fh:
            trace, metrics = run_scenario(cfg, plant_trace_file=fh)
    else:
        trace, metrics = run_scenario(cfg)
    write_trace(trace, out / "trace.csv")
    _write_metrics(metrics, out / "metrics.json")
    print(f"wrote {out / 'trace.csv'} ({trace.n_rows} rows) and {out / 'metrics.json'}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load_cfg(args.config, args.set)
    values = [float(v) for v in args.values.split(",") if v.strip() != ""]
    results = sweep_weights(
        cfg, args.param, values, device_index=args.device, workers=args.workers
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table_path = out / f"sweep_{args.param}.csv"
    batt_names = list(results[0][1].batt_abs_energy_wh) if results else []
    gen_names = list(results[0][1].gen_energy_wh) if results else []
    with open(table_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["value", "batt_abs_energy_mwh_total", "gen_energy_mwh_total", "rms_w"]
            + [f"abs_energy_mwh_{n}" for n in batt_names]
            + [f"caploss_pct_{n}" for n in batt_names]
        )
        for value, m in results:
            batt_total = sum(m.batt_abs_energy_wh.values()) / 1e6
            gen_total = sum(m.gen_energy_wh.values()) / 1e6
            row = [value, batt_total, gen_total, m.rms_tracking_error_w]
            row += [m.batt_abs_energy_wh[n] / 1e6 for n in batt_names]
            row += [m.capacity_loss_pct.get(n, float("nan")) for n in batt_names]
            w.writerow([format(v, ".17g") for v in row])
    with open(out / f"sweep_{args.param}.json", "w", encoding="utf-8") as fh:
        json.dump(
            [{"value": v, "metrics": m.to_dict()} for v, m in results],
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    print(f"wrote {table_path} ({len(results)} rows)")
    return EXIT_OK


def _cmd_dispatch(args) -> int:
    with open(args.file, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        costs = [
            QuadCost(a=float(c["a"]), b=float(c.get("b", 0.0)), c=float(c.get("c", 0.0)))
            for c in doc["costs"]
        ]
        bounds = [(float(lo), float(hi)) for lo, hi in doc["bounds"]]
        demand = float(doc["demand"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad dispatch file: {exc}") from exc
    alloc = economic_dispatch(costs, bounds, demand)
    for i, p in enumerate(alloc):
        print(f"unit {i + 1}: {p:.9g}")
    print(f"total: {alloc.sum():.9g}")
    return EXIT_OK


def _cmd_plotdata(args) -> int:
    trace = read_trace(args.trace)
    cfg = _load_cfg(args.config, args.set) if args.config else None
    out = Path(args.out) / "figures"
    out.mkdir(parents=True, exist_ok=True)
    n_g = trace.p_g.shape[1]
    n_b = trace.p_b.shape[1]

    def series(name: str, header: list[str], cols: list[np.ndarray]) -> None:
        with open(out / name, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for k in range(trace.n_rows):
                w.writerow([format(c[k], ".17g") for c in cols])

    series(
        "power_split.csv",
        ["t", "p_L", "p_total"]
        + [f"p_g_{i + 1}" for i in range(n_g)]
        + [f"p_b_{j + 1}" for j in range(n_b)],
        [trace.t, trace.p_l, trace.p_total]
        + [trace.p_g[:, i] for i in range(n_g)]
        + [trace.p_b[:, j] for j in range(n_b)],
    )
    series(
        "soc.csv",
        ["t"] + [f"q_{j + 1}" for j in range(n_b)],
        [trace.t] + [trace.q[:, j] for j in range(n_b)],
    )
    series(
        "tracking_error.csv",
        ["t", "error_w"],
        [trace.t, trace.p_total - trace.p_l],
    )
    series(
        "dual_iterations.csv",
        ["t", "iters", "residual_w"],
        [trace.t, trace.iters, trace.residual],
    )
    if cfg is not None and n_b == len(cfg.fleet.batteries):
        caps = [b.capacity_as for b in cfg.fleet.batteries]
        dq = [
            (caps[j] - trace.q_loss[:, j]) / caps[j] * 100.0 for j in range(n_b)
        ]
        series(
            "capacity_loss.csv",
            ["t"] + [f"dQ_pct_{j + 1}" for j in range(n_b)],
            [trace.t] + dq,
        )
    print(f"wrote figure series under {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridem",
        description="Predictive energy management for an islanded DC microgrid: "
        "simulate, sweep weights, dispatch, validate configs, export plot data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        if config_required:
            p.add_argument("config", help="path to a JSON scenario config")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config entry by dotted path (e.g. em.mode=distributed); "
            "applied before validation",
        )

    p = sub.add_parser("validate", help="load and validate a config without running")
    add_common(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("run", help="run one scenario; write trace.csv and metrics.json")
    add_common(p)
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument(
        "--plant-trace",
        action="store_true",
        help="also write plant_trace.csv sampled at the plant step",
    )
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run one scenario per weight value")
    add_common(p)
    p.add_argument(
        "--param",
        required=True,
        choices=["beta", "gamma_p", "gamma_q", "gamma_j"],
        help="weight to sweep; gamma_j is a single battery's gamma_p (needs --device)",
    )
    p.add_argument("--values", required=True, help="comma-separated weight values")
    p.add_argument(
        "--device", type=int, default=None, help="1-based device index for the sweep"
    )
    p.add_argument(
        "--workers", type=int, default=1, help="parallel runs (default 1, deterministic logs)"
    )
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("dispatch", help="solve a quadratic-cost dispatch problem")
    p.add_argument("file", help="JSON file with costs, bounds and demand")
    p.set_defaults(func=_cmd_dispatch)

    p = sub.add_parser("plotdata", help="convert a trace into per-figure series files")
    p.add_argument("trace", help="path to a trace.csv")
    p.add_argument(
        "--config",
        default=None,
        help="scenario config (enables the capacity-loss series)",
    )
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="config override by dotted path, applied before validation",
    )
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.set_defaults(func=_cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InfeasibleDispatch as exc:
        print(f"dispatch error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SimulationFault, RuntimeError, ValueError) as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
