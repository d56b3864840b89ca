"""Command-line experiment runner.

Subcommands: ``fig7 | fig8 | appendix-a | mnist | quip``.  Each experiment
writes ``report.json``, ``curve_*.csv`` and ``fig_*.png`` into the output
directory and exits 0 only if every built-in assertion of the selected
experiment passed.  Flags override values from an optional ``key = value``
config file, which in turn overrides the defaults; the default seed comes
from the QSNN_SEED environment variable.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .experiments import ExperimentConfig, quip_single, run_experiment
from .quip import UnsignedProductError

ENV_SEED = "QSNN_SEED"


def _default_seed() -> int:
    return int(os.environ.get(ENV_SEED, "12345"))


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part)


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part)


def _read_config_file(path: Path) -> dict:
    """Flat ``key = value`` pairs; '#' starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


_CONFIG_PARSERS = {
    "seed": int,
    "trials": int,
    "epochs": int,
    "train_size": int,
    "test_size": int,
    "quip_check": int,
    "grid_points": int,
    "pairs": int,
    "lr": float,
    "m": _int_list,
    "q": _int_list,
    "mode": str,
    "out": str,
    "images": str,
    "labels": str,
    "figures": lambda s: s.lower() in ("1", "true", "yes", "on"),
}


def _apply_config_file(args: argparse.Namespace) -> None:
    if not getattr(args, "config", None):
        return
    for key, raw in _read_config_file(args.config).items():
        if key not in _CONFIG_PARSERS:
            raise ValueError(f"unknown config key {key!r}")
        if getattr(args, key, None) is None:
            setattr(args, key, _CONFIG_PARSERS[key](raw))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsnn",
        description="Quantum-accelerated spiking neural network experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_parser(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help=f"rng seed (default ${ENV_SEED} or 12345)")
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--m", type=_int_list, default=None,
                       help="comma-separated control register sizes")
        p.add_argument("--q", type=_int_list, default=None,
                       help="comma-separated odd repetition counts")
        p.add_argument("--mode", choices=("analytic", "circuit"), default=None)
        p.add_argument("--config", type=str, default=None,
                       help="key = value file supplying defaults")
        p.add_argument("--no-figures", dest="figures", action="store_false",
                       default=None)
        return p

    experiment_parser("fig7", "success probability / decode error over random pairs")
    experiment_parser("fig8", "majority-vote success over the rounding-offset range")
    p = experiment_parser("appendix-a", "shot scaling of naive swap-test repetition")
    p.add_argument("--pairs", type=int, default=None)
    p = experiment_parser("mnist", "binary image classification pipeline")
    p.add_argument("--images", type=str, default=None, help="IDX image file")
    p.add_argument("--labels", type=str, default=None, help="IDX label file")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--train-size", type=int, default=None)
    p.add_argument("--test-size", type=int, default=None)
    p.add_argument("--quip-check", type=int, default=None,
                   help="held-out samples for the provider comparison (0 = off)")
    p.add_argument("--lr", type=float, default=None)

    p = sub.add_parser("quip", help="single inner-product estimation")
    p.add_argument("--w", type=_float_list, required=True, help="comma-separated floats")
    p.add_argument("--t", type=_float_list, required=True, help="comma-separated floats")
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mode", choices=("analytic", "circuit"), default="analytic")
    p.add_argument("--no-slack", dest="slack", action="store_false", default=True)
    return parser


_EXPERIMENT_IDS = {"fig7": "fig7a", "fig8": "fig8", "appendix-a": "appendixA",
                   "mnist": "mnist"}


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    _apply_config_file(args)
    if getattr(args, "out", None) is None:
        raise ValueError("an output directory is required (--out or config file)")
    overrides = {}
    for attr, key in (
        ("trials", "trials"), ("m", "m_values"), ("q", "q_values"), ("mode", "mode"),
        ("pairs", "pairs"), ("images", "images"), ("labels", "labels"),
        ("epochs", "epochs"), ("train_size", "train_size"), ("test_size", "test_size"),
        ("quip_check", "quip_check"), ("lr", "lr"), ("figures", "figures"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    if "images" in overrides:
        overrides["images"] = Path(overrides["images"])
    if "labels" in overrides:
        overrides["labels"] = Path(overrides["labels"])
    return ExperimentConfig(
        experiment=_EXPERIMENT_IDS[args.command],
        out_dir=Path(args.out),
        seed=args.seed if args.seed is not None else _default_seed(),
        **overrides,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "quip":
        try:
            record = quip_single(
                args.w, args.t, m=args.m, q=args.q,
                seed=args.seed if args.seed is not None else _default_seed(),
                mode=args.mode, slack=args.slack,
            )
        except (UnsignedProductError, ValueError) as err:
            json.dump({"error": type(err).__name__, "message": str(err)},
                      sys.stdout, indent=1)
            print()
            return 2
        json.dump(record, sys.stdout, indent=1, sort_keys=True)
        print()
        return 0

    try:
        cfg = _experiment_config(args)
        report = run_experiment(cfg)
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    for a in report.assertions:
        status = "PASS" if a["passed"] else "FAIL"
        print(f"[{status}] {a['name']}: {a['detail']}")
    print(f"report written to {cfg.out_dir / 'report.json'}")
    return 0 if report.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
