"""Command-line surface: ``run``, ``batch``, ``paired`` and ``check``."""
from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence

from .audit import PropertyFailure, check_config
from .config import ConfigError, SimulationConfig, load_config
from .engine import BatchRunError, run, run_batch, run_paired
from .outputs import write_batch, write_paired, write_run

log = logging.getLogger("outageflow")

EXIT_OK, EXIT_INVALID, EXIT_PROPERTY, EXIT_IO = 0, 1, 2, 3
DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "baseline.yaml"


def parse_seeds(text: Optional[str], first_seed: int, default_count: int) -> List[int]:
    """``N`` means N consecutive seeds starting at ``first_seed``; ``a,b,c`` is an explicit list."""
    if text is None:
        return list(range(first_seed, first_seed + default_count))
    text = text.strip()
    if "," in text:
        seeds = [int(part) for part in text.split(",") if part.strip()]
    else:
        count = int(text)
        if count <= 0:
            raise ValueError(f"--seeds count must be positive, got {count}")
        seeds = list(range(first_seed, first_seed + count))
    if not seeds:
        raise ValueError("--seeds produced an empty seed list")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=str(DEFAULT_CONFIG), help="YAML run configuration.")
    common.add_argument("--seed", type=int, help="Master seed (first seed for batch/paired).")
    common.add_argument("--out", help="Output directory (overrides run.out_dir).")
    common.add_argument("--parallel", type=int, help="Concurrent runs for batch/paired.")
    common.add_argument("--events", action="store_true", help="Also write the withdrawal event log.")
    common.add_argument("--verbose", action="store_true", help="Per-step debug logging.")

    multi = argparse.ArgumentParser(add_help=False)
    multi.add_argument("--seeds", help="Seed count N or comma-separated seed list.")

    parser = argparse.ArgumentParser(prog="outageflow", description="Payment outage run-pressure simulator.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="Single run: metrics CSV and summary.")
    sub.add_parser("batch", parents=[common, multi], help="Independent runs over several seeds.")
    paired = sub.add_parser("paired", parents=[common, multi], help="Baseline vs policy variant on identical seeds.")
    paired.add_argument("--variant", nargs="*", default=[], metavar="KEY=VALUE", help="Policy overrides for the variant leg.")
    sub.add_parser("check", parents=[common], help="Run the invariant audit suite.")
    return parser


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="[%(levelname)s] %(message)s",
        force=True,
    )


def _load(args: argparse.Namespace) -> SimulationConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.run.seed = args.seed
    if args.out:
        cfg.run.out_dir = Path(args.out).resolve()
    if args.parallel is not None:
        if args.parallel < 1:
            raise ConfigError("run.parallel", "--parallel must be at least 1")
        cfg.run.parallel = args.parallel
    if args.events:
        cfg.run.events = True
    return cfg


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load(args)
    result = run(cfg)
    written = write_run(result, cfg.run.out_dir)
    log.info("✓ outputs written to %s", cfg.run.out_dir)
    print(json.dumps({k: str(v) for k, v in written.items()}, indent=2))
    return EXIT_OK


def cmd_batch(args: argparse.Namespace) -> int:
    cfg = _load(args)
    seeds = parse_seeds(args.seeds, cfg.run.seed, cfg.run.seeds)
    result = run_batch(cfg, seeds, cfg.run.parallel)
    write_batch(result, cfg.run.out_dir)
    print(result.statistics.to_string())
    return EXIT_OK


def cmd_paired(args: argparse.Namespace) -> int:
    cfg = _load(args)
    seeds = parse_seeds(args.seeds, cfg.run.seed, cfg.run.seeds)
    result = run_paired(cfg, args.variant, seeds, cfg.run.parallel)
    write_paired(result, cfg.run.out_dir)
    print(json.dumps(result.medians, indent=2))
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    cfg = _load(args)
    checks = check_config(cfg)
    failed = [c for c in checks if not c.passed]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}" + (f": {c.detail}" if not c.passed else ""))
    if failed:
        raise PropertyFailure(failed)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "batch": cmd_batch, "paired": cmd_paired, "check": cmd_check}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except BatchRunError as exc:
        log.error("%s", exc)
        return EXIT_IO if isinstance(exc.cause, OSError) else EXIT_INVALID
    except PropertyFailure as exc:
        log.error("%d propert%s failed: %s", len(exc.failures), "y" if len(exc.failures) == 1 else "ies", exc)
        return EXIT_PROPERTY
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
