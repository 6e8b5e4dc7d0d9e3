"""Command-line entry point: ``lifted-ltc <subcommand> [options]``.

Every config field can be overridden by a flag of the same dotted name,
e.g. ``--seeds.main 3`` or ``--trials.alpha 100``.  Values are parsed as
JSON when possible and kept as strings otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, DomainError, ReplayMismatch, ResourceError, StructuralError, UnsupportedError
from .harness import EXPERIMENTS, ExperimentConfig, output_dir, replay, run, set_dotted

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_REPLAY = 0, 2, 3, 4


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lifted-ltc", description="Lifted-code testing and self-correction experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", type=Path, help="JSON config file")
        gen = sp.add_argument_group("system shortcuts")
        gen.add_argument("--p", type=int)
        gen.add_argument("--n", type=int)
        gen.add_argument("--q0", type=int)
        gen.add_argument("--q1", type=int)
        gen.add_argument("--q2", type=int)
        gen.add_argument("--copies", type=int, help="use the complete system with this many S copies")
        gen.add_argument("--system-file", help="system JSON document")
        sp.add_argument("--rs-degree", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
    rp = sub.add_parser("replay", help="re-run a report and compare every metric")
    rp.add_argument("report", type=Path)
    return ap


def _shortcut_system(args) -> dict | None:
    if args.system_file:
        return {"file": args.system_file}
    if args.p is None:
        return None
    if args.copies is not None:
        return {"complete": {"p": args.p, "n": args.n, "q0": args.q0 or 1, "copies": args.copies}}
    return {"grassmann": {"p": args.p, "n": args.n, "q0": args.q0, "q1": args.q1, "q2": args.q2}}


def build_config(args, extra: list[str]) -> ExperimentConfig:
    raw: dict = {}
    if args.config is not None:
        try:
            raw = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("--config", str(exc)) from None
        if not isinstance(raw, dict):
            raise ConfigError("--config", "top level must be an object")
    raw["experiment"] = args.command
    system = _shortcut_system(args)
    if system is not None:
        raw["system"] = system
    if args.rs_degree is not None:
        set_dotted(raw, "base.rs_degree", args.rs_degree)
    if args.seed is not None:
        set_dotted(raw, "seeds.main", args.seed)
    if args.out is not None:
        set_dotted(raw, "output.dir", args.out)
    i = 0
    while i < len(extra):
        flag = extra[i]
        if not flag.startswith("--") or flag == "--":
            raise ConfigError(flag, "unexpected argument")
        name, eq, value = flag[2:].partition("=")
        if not eq:
            if i + 1 >= len(extra):
                raise ConfigError(name, "flag needs a value")
            value = extra[i + 1]
            i += 1
        set_dotted(raw, name, _parse_value(value))
        i += 1
    return ExperimentConfig.from_dict(raw)


def main(argv: list[str] | None = None) -> int:
    ap = _parser()
    args, extra = ap.parse_known_args(argv)
    try:
        if args.command == "replay":
            if extra:
                raise ConfigError(extra[0], "unexpected argument")
            replay(args.report)
            print(f"replay ok: {args.report}")
            return EXIT_OK
        cfg = build_config(args, extra)
        report = run(cfg)
        out = output_dir(cfg)
        print(f"{cfg.experiment}: {len(report.metrics)} metrics -> {out / cfg.output['report']}, "
              f"{out / cfg.output['csv']}")
        return EXIT_OK
    except ReplayMismatch as exc:
        print(f"replay mismatch: {exc}", file=sys.stderr)
        return EXIT_REPLAY
    except ResourceError as exc:
        print(f"resource guard {exc.guard or '?'}: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigError, StructuralError, DomainError, UnsupportedError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
