"""Command line entry point: ``fedsgda {run,sweep,verify,gen-data,presets}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .core import ConfigError, FedSGDAError
from .harness import (
    PRESETS,
    build_instance,
    format_config,
    load_config,
    run_experiment,
    sweep,
    sweep_table,
)
from .oracle import verify_suite
from .problems import lipschitz_constants, write_datasets
from .rng import Phase, RngStream


def _add_config_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("config", help="config file path or preset name")
    sub.add_argument("--set", dest="updates", action="append", default=[], metavar="KEY=VALUE",
                     help="override a config key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedsgda", description="Federated stochastic gradient descent ascent simulator")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("run", help="run a single multi-seed experiment")
    _add_config_args(p)
    p.add_argument("--output", type=Path, help="output directory (overrides the config)")

    p = subs.add_parser("sweep", help="run the S/K/estimator grid from the config")
    _add_config_args(p)
    p.add_argument("--output", type=Path, help="output directory (overrides the config)")

    p = subs.add_parser("verify", help="run the oracle self-check suite")
    _add_config_args(p)
    p.add_argument("--canary", type=float, default=None,
                   help="perturb analytic gradients by this amount; the gradient check must then fail")

    p = subs.add_parser("gen-data", help="export the generated datasets as text")
    _add_config_args(p)
    p.add_argument("--output", type=Path, required=True, help="dataset file to write")
    p.add_argument("--seed", type=int, default=None, help="seed (default: first config seed)")

    p = subs.add_parser("presets", help="list the built-in named configurations")
    p.add_argument("--show", metavar="NAME", help="print one preset as a config file")
    return parser


def _load(args):
    cfg = load_config(args.config, args.updates)
    if getattr(args, "output", None) is not None and args.command in ("run", "sweep"):
        from dataclasses import replace
        cfg = replace(cfg, output=args.output)
    return cfg


def _cmd_run(args) -> int:
    cfg = _load(args)
    summary = run_experiment(cfg)
    print(f"{cfg.name}: seeds={len(cfg.seeds)} rounds={cfg.run.rounds} "
          f"final_grad_phi_norm_sq_mean={summary.final_grad_phi_norm_sq_mean:.6e}")
    if cfg.family == "auc":
        print(f"final_test_auc_mean={summary.column('test_auc')[-1]:.4f}")
    if cfg.output is not None:
        print(f"wrote {cfg.output}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    summaries = sweep(cfg)
    sys.stdout.write(sweep_table(summaries))
    return 0


def _cmd_verify(args) -> int:
    cfg = _load(args)
    canary = cfg.canary if args.canary is None else args.canary
    seed = cfg.seeds[0]
    inst = build_instance(cfg, seed)
    consts = lipschitz_constants(inst.problem, inst.datasets, seed=seed)
    report = verify_suite(inst.problem, inst.datasets, consts, RngStream(seed, phase=Phase.VERIFY), perturb=canary)
    for line in report.lines():
        print(line)
    print("verify PASS" if report.passed else "verify FAIL")
    return 0 if report.passed else 1


def _cmd_gen_data(args) -> int:
    cfg = _load(args)
    seed = cfg.seeds[0] if args.seed is None else args.seed
    inst = build_instance(cfg, seed)
    write_datasets(args.output, cfg.family, inst.datasets, inst.test)
    print(f"wrote {len(inst.datasets)} client datasets to {args.output}")
    return 0


def _cmd_presets(args) -> int:
    if args.show:
        if args.show not in PRESETS:
            print(f"unknown preset {args.show!r}", file=sys.stderr)
            return 2
        sys.stdout.write(format_config(PRESETS[args.show]))
        return 0
    for name, mapping in PRESETS.items():
        keys = ("clients_per_round", "local_steps", "local_batch_size", "estimator", "c_eta", "c_gamma", "c_alpha", "rho")
        desc = " ".join(f"{k}={mapping[k]}" for k in keys)
        print(f"{name} {desc}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
    "gen-data": _cmd_gen_data,
    "presets": _cmd_presets,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (FedSGDAError, FloatingPointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())
