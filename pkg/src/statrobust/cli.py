"""Command line: ``statrobust {run,divergence,report}``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, StatRobustError
from .experiment import report_from_dir, run_divergence, run_experiment

log = logging.getLogger("statrobust")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage mistakes are configuration errors, not runtime failures
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    p = _Parser(prog="statrobust", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", parents=[common],
                         help="run the three chain ensembles and report")
    run.add_argument("--config", required=True)
    run.add_argument("--out")
    run.add_argument("--workers", type=int)
    run.add_argument("--seed-offset", type=int, default=0)

    div = sub.add_parser("divergence", parents=[common],
                         help="worst-case JSD sweep of the hardware sampler")
    div.add_argument("--config", required=True)
    div.add_argument("--out")

    rep = sub.add_parser("report", parents=[common],
                         help="recompute the report from saved traces")
    rep.add_argument("directory", nargs="?")
    rep.add_argument("--out")
    return p


def _out_dir(args, cfg):
    out = args.out or (cfg.output if cfg is not None else None)
    if not out:
        raise ConfigError("no output directory: pass --out or set 'output' in the config")
    return Path(out)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            directory = args.directory or args.out
            if not directory:
                raise ConfigError("report: give the experiment directory")
            report_from_dir(directory, args.out)
            return EXIT_OK
        cfg = load_config(args.config)
        out = _out_dir(args, cfg)
        if args.command == "run":
            if args.workers is not None and args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            run_experiment(cfg, out, workers=args.workers, seed_offset=args.seed_offset)
        else:
            run_divergence(cfg, out)
        return EXIT_OK
    except ConfigError as exc:
        print(f"statrobust: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StatRobustError, OSError) as exc:
        print(f"statrobust: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
