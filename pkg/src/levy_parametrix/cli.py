"""Command line entry point: ``levy-parametrix run|list-checks|validate``."""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError
from .pipeline import OUTPUT_ENV, bundled_configs, list_checks, load_config, run


def _parser():
    ap = argparse.ArgumentParser(
        prog="levy-parametrix",
        description="Parametrix heat kernels of Levy-type operators and empirical estimate checks.",
        epilog=f"Outputs go to $${OUTPUT_ENV}/<output_dir> (default ./runs/<name>).".replace("$$", "$"),
    )
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a config file or bundled config name")
    r.add_argument("config")
    r.add_argument("-q", "--quiet", action="store_true", help="log to run.log only")
    v = sub.add_parser("validate", help="parse and validate a config without running it")
    v.add_argument("config")
    sub.add_parser("list-checks", help="print the check catalog")
    sub.add_parser("list-configs", help="print the bundled config names")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-checks":
        for name, tag, desc in list_checks():
            print(f"{name}\t{tag}\t{desc}")
        return 0
    if args.command == "list-configs":
        print("\n".join(bundled_configs()))
        return 0
    if args.command == "validate":
        try:
            cfg = load_config(args.config)
        except ConfigError as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        print(f"ok: {cfg['name']} ({len(cfg.get('checks', []))} checks)")
        return 0
    log = logging.getLogger("levy_parametrix")
    log.setLevel(logging.INFO)
    if not args.quiet:
        h = logging.StreamHandler(sys.stderr)
        h.setFormatter(logging.Formatter("%(message)s"))
        log.addHandler(h)
    return run(args.config)


if __name__ == "__main__":
    sys.exit(main())
