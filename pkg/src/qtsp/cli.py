"""``qtsp <mode>`` command line; see ``qtsp --help``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import MODES, ConfigError, ExperimentConfig, run

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qtsp", description="Binary-register variational TSP benchmarks")
    p.add_argument("mode", choices=MODES)
    p.add_argument("paths", nargs="*", help="input artifacts (report mode)")
    p.add_argument("--config", type=Path, help="JSON experiment config")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--paper-scale", action="store_true", help="10 instances x 100 inits, depths n-1..30")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, help="root seed (overrides the config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_intermixed_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        doc = json.loads(args.config.read_text()) if args.config else {}
        doc["mode"] = args.mode
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer")
            doc["root_seed"] = args.seed
        if args.paper_scale:
            doc["paper_scale"] = True
        cfg = ExperimentConfig.from_dict(doc)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
    except (ConfigError, json.JSONDecodeError, OSError) as e:
        print(f"qtsp: invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run(cfg, args.out, workers=args.workers, paths=args.paths)
    except ConfigError as e:
        print(f"qtsp: invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as e:
        print(f"qtsp: {e}", file=sys.stderr)
        return EXIT_FAILURE
    for name in manifest["files"]:
        print(args.out / name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
