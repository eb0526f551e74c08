"""Standalone trainer command: `looped-trainer --config config.json`."""

from __future__ import annotations

import argparse
import sys

from .train import TrainerConfig, train_and_eval


def run(argv) -> int:
    parser = argparse.ArgumentParser(prog="looped-trainer", description=__doc__)
    parser.add_argument("--config", required=True, help="JSON file with TrainerConfig fields")
    parser.add_argument("--out", default=None, help="override the report path from the config")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        cfg = TrainerConfig.from_json(args.config)
        if args.out:
            cfg.out = args.out
        report = train_and_eval(cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for k, stats in report.aggregates().items():
        print(
            f"loops={k:3d}  id_acc={stats['id_mean']:.3f}+-{stats['id_std']:.3f}  "
            f"ood_acc={stats['ood_mean']:.3f}+-{stats['ood_std']:.3f}"
        )
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
