"""Command line entry point: ``hardy-nls <scenario> --config <path>``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from hardy_nls.experiments import ConfigError, RunConfig, Scenario, run

_ALIASES = {s.value.lower(): s for s in Scenario}
_ALIASES.update({"groundstate": Scenario.GROUND_STATE, "blowup": Scenario.BLOWUP_CRITICAL})


def _scenario(name: str) -> Scenario:
    key = name.replace("-", "").replace("_", "").lower()
    if key not in _ALIASES:
        raise argparse.ArgumentTypeError(f"unknown scenario {name!r}; choose from {', '.join(s.value for s in Scenario)}")
    return _ALIASES[key]


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hardy-nls", description="Ground states and dynamics of NLS with an inverse-square potential on the half-line.")
    ap.add_argument("scenario", type=_scenario, help=", ".join(s.value for s in Scenario))
    ap.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    ap.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
    ap.add_argument("--seed", type=_seed, default=None, help="RNG seed (overrides the config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        if cfg.scenario is not args.scenario:
            doc = cfg.to_dict()
            doc["scenario"] = args.scenario.value
            cfg = RunConfig.from_dict(doc)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"RESULT {args.scenario.value} FAIL inf")
        return 2
    try:
        res = run(cfg, args.out)
    except Exception as exc:  # solver failure: report and exit nonzero
        logging.getLogger("hardy_nls").exception("scenario failed")
        print(f"error: {exc}", file=sys.stderr)
        print(f"RESULT {cfg.scenario.value} FAIL inf")
        return 1
    for c in res.checks:
        print(f"{'ok  ' if c.passed else 'FAIL'} {c.name}: {c.value:.6g} {'<' if c.strict else '<='} {c.bound:.6g}")
    print(res.verdict())
    return 0 if res.passed else 1


if __name__ == "__main__":
    sys.exit(main())
