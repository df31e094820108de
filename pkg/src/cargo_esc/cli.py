"""Command-line scenario runner.

Exit codes: 0 run completed, 2 run crashed or hit an allocation fault,
1 configuration or internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import SCENARIOS, ConfigError, build_config, dump_defaults, load_config
from .estimator import UnstableEstimatorConfig
from .outputs import OutputFlags, emit_outputs, format_summary, summarize
from .simulation import run_scenario

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CRASHED = 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cargo-esc",
        description="Simulate a fully actuated cargo multirotor with online CoM estimation.",
    )
    p.add_argument("--scenario", choices=SCENARIOS, help="scenario preset (default: from config or 'custom')")
    p.add_argument("--config", type=Path, help="YAML config file layered over the preset")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    p.add_argument("--duration", type=float, help="simulated seconds, overrides the preset")
    p.add_argument("--seed", type=int, help="noise RNG seed")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted-path override, e.g. estimator.k3_source=neg_tau_y (repeatable)")
    p.add_argument("--no-plot-data", action="store_true", help="skip per-figure plot-data files")
    p.add_argument("--dump-config", action="store_true", help="print the resolved defaults as YAML and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.dump_config:
        sys.stdout.write(dump_defaults(args.scenario or "custom"))
        return EXIT_OK

    updates = {}
    if args.duration is not None:
        updates["duration"] = args.duration
    if args.seed is not None:
        updates["seed"] = args.seed
    try:
        if args.config is not None:
            cfg = load_config(args.config, args.scenario, [*args.overrides,
                                                           *(f"{k}={v}" for k, v in updates.items())])
        else:
            cfg = build_config(args.scenario, None, args.overrides, **updates)
        log = run_scenario(cfg)
        emit_outputs(log, args.out, OutputFlags(plot_data=not args.no_plot_data))
    except (ConfigError, UnstableEstimatorConfig) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    sys.stdout.write(format_summary(summarize(log)))
    return EXIT_OK if log.termination_cause == "completed" else EXIT_CRASHED


if __name__ == "__main__":
    raise SystemExit(main())
