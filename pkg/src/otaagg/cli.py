"""Command-line entry points: simulate, fig4, and mst-check.

A JSON config file can seed any simulate option; explicit flags override file
keys. Exit codes: 0 on success, 2 when every trial of a run was infeasible,
1 on errors.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .experiments import (
    ALL_SCHEMES,
    ExperimentConfig,
    emit_csv,
    emit_plot_data,
    gamma_tradeoff_curve,
    run_sweep,
)
from .mapreduce import parse_iva_spec, sample_ivas
from .topology import build_mst_kruskal, build_mst_prim, read_graph
from .transceivers import DinkelbachOptions


def parse_value_list(text: str) -> list[float]:
    """Parse either 'a,b,c' or an inclusive 'start:stop:step' range."""
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) == 2:
            parts.append(1.0)
        start, stop, step = parts
        if step <= 0:
            raise ValueError(f"range step must be positive in {text!r}")
        values = []
        v = start
        while v <= stop + 1e-9 * max(1.0, abs(step)):
            values.append(round(v, 12))
            v += step
        return values
    return [float(p) for p in text.split(",")]


def _add_simulate_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; flags override file keys")
    sub.add_argument("--k", type=int)
    sub.add_argument("--radius", type=float)
    sub.add_argument("--pathloss", type=float)
    sub.add_argument("--gain", type=float)
    sub.add_argument("--snr-db", help="received-SNR sweep: comma list or start:stop:step")
    sub.add_argument("--k-sweep", help="device-count sweep: comma list or start:stop:step")
    sub.add_argument("--fixed-snr-db", type=float, help="SNR used with --k-sweep")
    sub.add_argument("--iva", help="IVA distribution, e.g. uniform:1:5 or cgauss:3:1.3333")
    sub.add_argument("--schemes", help=f"comma list from {','.join(ALL_SCHEMES)}")
    sub.add_argument("--trials", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--workers", type=int)
    sub.add_argument("--quantizer", choices=["randomized", "deterministic"])
    sub.add_argument("--dinkelbach-eps", type=float)
    sub.add_argument("--dinkelbach-max-iter", type=int)
    sub.add_argument("--randomization-rounds", type=int)
    sub.add_argument("--out", help="CSV output path (stdout if omitted)")
    sub.add_argument("--plot-data", help="optional gnuplot-ready output path")


def _device_map(raw: dict) -> tuple[float | None, dict[int, float]]:
    default = raw.get("default")
    overrides = {int(k): float(v) for k, v in raw.items() if k != "default"}
    return (float(default) if default is not None else None), overrides


def build_experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    file_cfg: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)

    def pick(flag_value, key, fallback):
        if flag_value is not None:
            return flag_value
        return file_cfg.get(key, fallback)

    snr_raw = pick(args.snr_db, "snr_db", None)
    k_sweep_raw = pick(args.k_sweep, "k_sweep", None)
    if snr_raw is None and k_sweep_raw is None:
        snr_raw = "-5:20:5"
    snr_db = None
    k_sweep = None
    if snr_raw is not None:
        values = snr_raw if isinstance(snr_raw, list) else parse_value_list(str(snr_raw))
        snr_db = tuple(float(v) for v in values)
    if k_sweep_raw is not None:
        values = (
            k_sweep_raw if isinstance(k_sweep_raw, list) else parse_value_list(str(k_sweep_raw))
        )
        k_sweep = tuple(int(v) for v in values)

    schemes_raw = pick(args.schemes, "schemes", "dinkelbach,rayleigh,common,unbiased")
    schemes = (
        tuple(schemes_raw)
        if isinstance(schemes_raw, (list, tuple))
        else tuple(s.strip() for s in str(schemes_raw).split(",") if s.strip())
    )

    quantizer = pick(args.quantizer, "quantizer", "randomized")
    power_default, power_overrides = _device_map(file_cfg.get("power", {}))
    sigma_default, sigma_overrides = _device_map(file_cfg.get("sigma_sq", {}))

    dinkelbach = DinkelbachOptions(
        tolerance=float(pick(args.dinkelbach_eps, "dinkelbach_eps", 1e-6)),
        max_iter=int(pick(args.dinkelbach_max_iter, "dinkelbach_max_iter", 50)),
        randomization_rounds=int(
            pick(args.randomization_rounds, "randomization_rounds", 100)
        ),
    )

    return ExperimentConfig(
        schemes=schemes,
        k=int(pick(args.k, "k", 20)),
        radius=float(pick(args.radius, "radius", 0.35)),
        pathloss_exponent=float(pick(args.pathloss, "pathloss", 2.0)),
        reference_gain=float(pick(args.gain, "gain", 1.0)),
        snr_db=snr_db,
        k_sweep=k_sweep,
        fixed_snr_db=float(pick(args.fixed_snr_db, "fixed_snr_db", 5.0)),
        iva=parse_iva_spec(str(pick(args.iva, "iva", "uniform:1:5"))),
        trials=int(pick(args.trials, "trials", 1000)),
        master_seed=int(pick(args.seed, "seed", 0)),
        quantizer_randomized=quantizer == "randomized",
        dinkelbach=dinkelbach,
        power_default=power_default if power_default is not None else 1.0,
        power_overrides=power_overrides,
        sigma_sq_default=sigma_default,
        sigma_sq_overrides=sigma_overrides,
        workers=int(pick(args.workers, "workers", 1)),
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    config = build_experiment_config(args)
    rows = run_sweep(config)
    if args.out:
        emit_csv(rows, args.out)
    else:
        from .experiments import rows_to_csv

        sys.stdout.write(rows_to_csv(rows))
    if args.plot_data:
        emit_plot_data(rows, args.plot_data)
    if all(r.infeasible_rate >= 1.0 for r in rows):
        return 2
    return 0


def cmd_fig4(args: argparse.Namespace) -> int:
    grid = parse_value_list(args.pmin_snr_db)
    ivas = sample_ivas(parse_iva_spec(args.iva), args.k, seed=args.seed)
    sum_abs_sq = abs(complex(ivas.source_vector.sum())) ** 2
    rows = gamma_tradeoff_curve(grid, sum_abs_sq)
    lines = ["pmin_over_sigma_db,mse_biased,mse_unbiased,ratio"]
    for db, biased, unbiased, ratio in rows:
        lines.append(f"{db!r},{biased!r},{unbiased!r},{ratio!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_mst_check(args: argparse.Namespace) -> int:
    graph = read_graph(args.graph)
    prim = build_mst_prim(graph)
    kruskal = build_mst_kruskal(graph)
    weight_gap = abs(prim.total_weight - kruskal.total_weight)
    rel = weight_gap / max(prim.total_weight, np.finfo(float).tiny)
    print(f"k={graph.k} destination={graph.destination} edges={len(graph.edges)}")
    print(f"prim weight={prim.total_weight:.17g} levels={prim.levels}")
    print(f"kruskal weight={kruskal.total_weight:.17g} levels={kruskal.levels}")
    print(f"identical edge sets: {prim.edge_set == kruskal.edge_set}")
    if rel > 1e-12:
        print(f"FAIL: tree weights differ by relative {rel:g}")
        return 1
    print("PASS: tree weights agree to relative 1e-12")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="otaagg",
        description="Multi-level over-the-air aggregation simulator and optimizers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run a Monte Carlo sweep and emit CSV")
    _add_simulate_args(simulate)
    simulate.set_defaults(func=cmd_simulate)

    fig4 = sub.add_parser("fig4", help="closed-form biased/unbiased MSE trade-off curve")
    fig4.add_argument("--pmin-snr-db", default="-10:30:1")
    fig4.add_argument("--k", type=int, default=20)
    fig4.add_argument("--iva", default="cgauss:0:0.2")
    fig4.add_argument("--seed", type=int, default=0)
    fig4.add_argument("--out")
    fig4.set_defaults(func=cmd_fig4)

    mst = sub.add_parser("mst-check", help="validate the MST construction on a graph file")
    mst.add_argument("--graph", required=True)
    mst.set_defaults(func=cmd_mst_check)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
