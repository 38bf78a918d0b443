"""Command-line front end: validate configs and run sweeps to files.

Exit codes: 0 success, 2 invalid config (the failing field is named),
3 problem size beyond a hard capacity limit.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

from .channel import ConfigError, SimulationConfig
from .clustering import CapacityError, RULES
from .evaluation import (METHODS, aggregate_results, default_workers,
                         run_sweep, write_aggregate_csv, write_results_csv,
                         write_results_jsonl)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAPACITY = 3


@dataclass
class RunManifest:
    config_path: str
    output_dir: str
    methods: list[str]
    rules: list[str]
    timestamp: str
    master_seed: int
    overrides: dict = field(default_factory=dict)
    workers: int = 1

    def write(self, path: str):
        with open(path, "w") as f:
            json.dump(asdict(self), f, indent=2)
            f.write("\n")


def _parse_overrides(pairs: list[str]) -> dict:
    out = {}
    for item in pairs:
        key, eq, raw = item.partition("=")
        if not eq or not key:
            raise ConfigError(item, "override must look like KEY=VALUE")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def load_config(path: str, overrides: dict | None = None) -> SimulationConfig:
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    data = json.loads(text) if text.strip() else {}
    if not isinstance(data, dict):
        raise ConfigError("config", "top-level JSON value must be an object")
    if overrides:
        data.update(overrides)
    return SimulationConfig.from_dict(data)


def _resolved_view(cfg: SimulationConfig) -> dict:
    return {
        "config": cfg.to_dict(),
        "derived": {
            "noise_power_mw_per_band": cfg.noise_power_mw,
            "power_budget_mw_per_user": cfg.power_budget_mw,
        },
    }


def cmd_validate(config_path: str) -> int:
    try:
        cfg = load_config(config_path)
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(_resolved_view(cfg), indent=2))
    return EXIT_OK


def cmd_run(config_path: str, out_dir: str, overrides: list[str],
            methods: str, rules: str) -> int:
    try:
        cfg = load_config(config_path, _parse_overrides(overrides))
        method_list = [m.strip() for m in methods.split(",") if m.strip()]
        rule_list = [r.strip() for r in rules.split(",") if r.strip()]
        for m in method_list:
            if m not in METHODS:
                raise ConfigError("methods", f"unknown method {m!r}")
        for r in rule_list:
            if r not in RULES:
                raise ConfigError("rules", f"unknown rule {r!r}")
        workers = default_workers()
    except (ConfigError, json.JSONDecodeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        results = run_sweep(cfg, method_list, rule_list, workers=workers)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w") as f:
        json.dump(_resolved_view(cfg), f, indent=2)
        f.write("\n")
    write_results_csv(results, os.path.join(out_dir, "results.csv"))
    write_results_jsonl(results, os.path.join(out_dir, "results.jsonl"))
    agg = aggregate_results(results)
    write_aggregate_csv(agg, os.path.join(out_dir, "aggregate.csv"))

    from .report import render_sum_rate_figure
    figure_path = os.path.join(out_dir, "sum_rate_vs_cells.png")
    render_sum_rate_figure(agg, figure_path)

    manifest = RunManifest(
        config_path=os.path.abspath(config_path),
        output_dir=os.path.abspath(out_dir),
        methods=method_list,
        rules=rule_list,
        timestamp=datetime.now(timezone.utc).isoformat(),
        master_seed=cfg.master_seed,
        overrides=_parse_overrides(overrides),
        workers=workers,
    )
    manifest.write(os.path.join(out_dir, "manifest.json"))
    print(f"wrote {len(results)} rows to {out_dir} "
          f"({cfg.num_realizations} realizations, workers={workers})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vcellsim",
        description="Virtual-cell uplink simulator: cluster BSs, allocate "
                    "power for joint decoding, score network sum rate.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a Monte Carlo sweep to an output directory")
    p_run.add_argument("--config", required=True, help="JSON config path")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config field")
    p_run.add_argument("--methods", default=",".join(METHODS),
                       help=f"comma-separated clustering methods (default: all of {','.join(METHODS)})")
    p_run.add_argument("--rules", default=",".join(RULES),
                       help=f"comma-separated affiliation rules (default: {','.join(RULES)})")

    p_val = sub.add_parser("validate", help="check a config and print it resolved")
    p_val.add_argument("--config", required=True, help="JSON config path")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out, args.overrides,
                       args.methods, args.rules)
    return cmd_validate(args.config)


if __name__ == "__main__":
    sys.exit(main())
