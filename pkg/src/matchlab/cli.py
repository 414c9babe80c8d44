"""Command-line interface for the experiment drivers.

Every subcommand accepts the shared seeding/parallelism flags, optionally a
JSON config file, and writes its delimited outputs, JSON summary, and
figures into the output directory.  Command-line flags override config-file
values, which override the built-in defaults, and the effective
configuration is hashed into every output file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ._version import __version__
from .experiments import (
    ExperimentConfig,
    run_calibration,
    run_distribution_fit,
    run_dyadic,
    run_full_model_test,
    run_matching_bench,
    run_mean_growth,
    run_price_map,
)

_GROWTH_SIZES = tuple(int(2**j) for j in range(12))

_COMMANDS = {
    "bench": {
        "driver": run_matching_bench,
        "defaults": {"metric": "plane", "reps": 300, "sizes": (1024,)},
        "help": "cost statistics of the matchers on shared random instances",
    },
    "mean-growth": {
        "driver": run_mean_growth,
        "defaults": {"metric": "torus", "reps": 300, "sizes": _GROWTH_SIZES},
        "help": "mean exact cost by size and the logarithmic growth-law fit",
    },
    "dist-fit": {
        "driver": run_distribution_fit,
        "defaults": {"metric": "torus", "reps": 300, "sizes": (256, 1024)},
        "help": "hazard-family fits of cost samples with calibrated tests",
    },
    "price-map": {
        "driver": run_price_map,
        "defaults": {"metric": "torus", "reps": 1},
        "help": "rasterized dual prices of one seeded toroidal matching",
    },
    "dyadic": {
        "driver": run_dyadic,
        "defaults": {"metric": "torus", "reps": 300},
        "help": "merge-chain records with recursion and conditional fits",
    },
    "model-test": {
        "driver": run_full_model_test,
        "defaults": {"metric": "torus", "reps": 817},
        "help": "fit the chain surrogate and score it by replicate assignment",
    },
    "calibrate": {
        "driver": run_calibration,
        "defaults": {"metric": "torus", "reps": 1},
        "help": "simulate cut points for the fitted-parameter Kolmogorov test",
    },
}


def _parse_sizes(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from exc
    if not sizes:
        raise argparse.ArgumentTypeError("size list is empty")
    return sizes


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="master seed (default 2024)")
    parser.add_argument("--reps", type=int, default=None, help="Monte Carlo replications")
    parser.add_argument(
        "--metric", choices=["plane", "torus"], default=None, help="distance convention"
    )
    parser.add_argument(
        "--out", type=Path, default=None, help="output directory (default ./matchlab-out/<cmd>)"
    )
    parser.add_argument("--threads", type=int, default=None, help="worker processes (default 1)")
    parser.add_argument(
        "--config", type=Path, default=None, help="JSON file with ExperimentConfig fields"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matchlab",
        description="matching-cost experiments on random planar point sets",
    )
    parser.add_argument("--version", action="version", version=f"matchlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, cmd in _COMMANDS.items():
        p = sub.add_parser(name, help=cmd["help"])
        _add_common(p)
        if name in ("bench", "mean-growth", "dist-fit"):
            p.add_argument(
                "--sizes", type=_parse_sizes, default=None, help="comma-separated point counts"
            )
        if name == "bench":
            p.add_argument(
                "--algorithms",
                default=None,
                help="comma list from exact,ajtai,ajtai+improve",
            )
            p.add_argument("--kinds", default=None, help="comma list from uniform,normal")
        if name == "dist-fit":
            p.add_argument(
                "--cutpoints",
                type=Path,
                default=None,
                help="calibration JSON produced by `matchlab calibrate`",
            )
        if name == "price-map":
            p.add_argument("--n", type=int, default=None, help="points per side (default 1024)")
            p.add_argument(
                "--resolution", type=int, default=None, help="pixels per side (default 256)"
            )
            p.add_argument(
                "--buckets", type=int, default=None, help="price buckets (default 16)"
            )
        if name in ("dyadic", "model-test"):
            p.add_argument("--k-max", type=int, default=None, help="deepest level (default 10)")
        if name == "model-test":
            p.add_argument(
                "--sim-batches", type=int, default=None, help="simulated batches (default 5)"
            )
        if name == "calibrate":
            p.add_argument(
                "--n-obs", type=int, default=None, help="observations per trial (default 817)"
            )
            p.add_argument(
                "--trials", type=int, default=None, help="calibration trials (default 5000)"
            )
    return parser


def _build_config(args: argparse.Namespace, command: str) -> ExperimentConfig:
    settings: dict = dict(_COMMANDS[command]["defaults"])
    if args.config is not None:
        with args.config.open("r", encoding="utf-8") as fh:
            file_settings = json.load(fh)
        if not isinstance(file_settings, dict):
            raise SystemExit(f"config file {args.config} must hold a JSON object")
        settings.update(file_settings)
    direct = {
        "seed": args.seed,
        "reps": args.reps,
        "metric": args.metric,
        "threads": args.threads,
        "sizes": getattr(args, "sizes", None),
        "n_points": getattr(args, "n", None),
        "resolution": getattr(args, "resolution", None),
        "n_buckets": getattr(args, "buckets", None),
        "k_max": getattr(args, "k_max", None),
        "n_obs": getattr(args, "n_obs", None),
        "trials": getattr(args, "trials", None),
        "model_sim_batches": getattr(args, "sim_batches", None),
    }
    algorithms = getattr(args, "algorithms", None)
    if algorithms is not None:
        direct["algorithms"] = tuple(tok for tok in algorithms.split(",") if tok)
    kinds = getattr(args, "kinds", None)
    if kinds is not None:
        direct["kinds"] = tuple(tok for tok in kinds.split(",") if tok)
    cutpoints = getattr(args, "cutpoints", None)
    if cutpoints is not None:
        with Path(cutpoints).open("r", encoding="utf-8") as fh:
            cal = json.load(fh)
        direct["cutpoints"] = {"cut05": float(cal["cut05"]), "cut01": float(cal["cut01"])}
    for key, value in direct.items():
        if value is not None:
            settings[key] = value
    settings.setdefault("out_dir", Path("matchlab-out") / command)
    if args.out is not None:
        settings["out_dir"] = args.out
    valid = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(settings) - valid
    if unknown:
        raise SystemExit(f"unknown config fields: {sorted(unknown)}")
    try:
        return ExperimentConfig(**settings)
    except (TypeError, ValueError) as exc:
        raise SystemExit(f"bad configuration: {exc}")


def _headline(command: str, summary: dict) -> str:
    if command == "bench":
        parts = []
        for n, block in summary["sizes"].items():
            for key, st in block["stats"].items():
                parts.append(f"{key}@{n}: mean={st['mean']:.4f} sd={st['sd']:.4f}")
        return "; ".join(parts)
    if command == "mean-growth":
        fit = summary["fit"]
        return (
            f"fit: {fit['beta']:.4f} log(n + {fit['alpha']:.3f}) + {fit['gamma']:.4f} "
            f"(rss {fit['rss']:.2e})"
        )
    if command == "dist-fit":
        parts = [f"n={n}: ks={blk['ks']:.3f}" for n, blk in summary["fits"].items()]
        return "; ".join(parts)
    if command == "price-map":
        return (
            f"n={summary['n']} cost={summary['total_cost']} max_dual={summary['max_dual']} "
            f"wrapping={summary['wrapping_couples']}"
        )
    if command == "dyadic":
        rec = summary["recursion"]
        return (
            f"a={rec['a']:.4f} b={rec['b']:.4f} defect={rec['stationarity_defect']:.4f} "
            f"sd={rec['noise_sd']:.4f} restricted={summary['restricted_dispersion']:.4f}"
        )
    if command == "model-test":
        return (
            f"data_vs_model={summary['data_vs_model']:.1f} "
            f"model_vs_model={summary['model_vs_model']:.1f} "
            f"data_vs_shrunk={summary['data_vs_shrunk']:.1f} "
            f"shrunk_vs_shrunk={summary['shrunk_vs_shrunk']:.1f}"
        )
    if command == "calibrate":
        return f"cut05={summary['cut05']:.4f} cut01={summary['cut01']:.4f}"
    return ""


def main(argv: "list[str] | None" = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = _build_config(args, args.command)
    driver = _COMMANDS[args.command]["driver"]
    summary = driver(config)
    line = _headline(args.command, summary)
    if line:
        print(line)
    print(f"outputs in {config.out_dir} (config {config.config_hash()})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
