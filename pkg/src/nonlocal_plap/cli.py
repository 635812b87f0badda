"""Command line entry point: ``run <config>`` and ``suite smoke|full``."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, NonlocalError

EXIT_OK, EXIT_AUDIT_FAILED, EXIT_CONFIG = 0, 1, 2
DEFAULT_OUT = "nonlocal_plap_out"


def _out_dir(args, cfg_out: str = "") -> Path:
    env = os.environ.get("NONLOCAL_PLAP_OUT")
    if env:
        return Path(env)
    return Path(args.out or cfg_out or DEFAULT_OUT)


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nonlocal-plap", description="Evaluate and audit nonlocal p-Laplacian experiments.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output directory (NONLOCAL_PLAP_OUT overrides)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for independent audits")
    common.add_argument("--seed", type=_seed, default=None, help="random seed (u64)")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run one experiment config")
    r.add_argument("config", help="path to an INI experiment config")
    s = sub.add_parser("suite", parents=[common], help="run a named verification suite")
    s.add_argument("name", choices=("smoke", "full"))
    return ap


def _cmd_run(args) -> int:
    from .config import load
    from .runner import run_config, write_report

    try:
        cfg = load(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"config error: cannot read {args.config}: {e.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rep = run_config(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NonlocalError as e:
        print(f"[FAIL] {cfg.kind}: {e.code}: {e}", file=sys.stderr)
        return EXIT_AUDIT_FAILED
    out = _out_dir(args, cfg.out_dir)
    stem = cfg.label or rep.name
    write_report(rep, out, stem)
    print(rep.summary_line())
    return EXIT_OK if rep.passed else EXIT_AUDIT_FAILED


def _cmd_suite(args) -> int:
    from .acceptance import run_suite
    from .runner import write_report

    seed = 0 if args.seed is None else args.seed
    reps = run_suite(args.name, seed, max(1, args.jobs))
    out = _out_dir(args) / args.name
    for rep in reps:
        write_report(rep, out)
    for rep in reps:
        print(rep.summary_line())
    failed = [r.name for r in reps if not r.passed]
    print(f"{len(reps) - len(failed)}/{len(reps)} passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_AUDIT_FAILED if failed else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print(f"config error: {ConfigError('jobs', 'jobs >= 1', args.jobs)}", file=sys.stderr)
        return EXIT_CONFIG
    return _cmd_run(args) if args.command == "run" else _cmd_suite(args)


if __name__ == "__main__":
    sys.exit(main())
