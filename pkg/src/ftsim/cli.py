"""Command-line entry point: ``ftsim <subcommand> --config FILE``."""
from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .config import KINDS, ConfigError, load_config

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ftsim", description=__doc__)
    p.add_argument("--version", action="version", version=f"ftsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind, help=f"run the {kind} experiment")
        s.add_argument("--config", required=True, help="flat key = value config file")
        s.add_argument("--out", help="output directory (overrides $FTSIM_OUT and the config)")
        s.add_argument("--seed", type=_u64, help="override the config seed")
        s.add_argument("--workers", type=int, help="worker processes for independent trials")
    v = sub.add_parser("validate", help="check a config without running anything")
    v.add_argument("--config", required=True)
    r = sub.add_parser("replay", help="replay a quantum-double event log")
    r.add_argument("--log", required=True, help="line-delimited event records")
    r.add_argument("--out", help="write final_state.json here instead of stdout")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        try:
            cfg = load_config(args.config)
        except ConfigError as err:
            print("\n".join(err.messages), file=sys.stderr)
            return EXIT_CONFIG
        print(f"ok: {cfg.experiment} config, fingerprint {cfg.fingerprint()}")
        return EXIT_OK

    if args.command == "replay":
        from .harness import replay_file
        from .quantum_double import DoubleError

        try:
            st = replay_file(args.log)
        except (OSError, DoubleError) as err:
            print(f"replay failed: {err}", file=sys.stderr)
            return EXIT_RUNTIME
        text = st.dumps() + "\n"
        if args.out:
            from pathlib import Path

            from .harness import write_outputs

            write_outputs(Path(args.out), {"final_state.json": text})
        else:
            sys.stdout.write(text)
        return EXIT_OK

    from .harness import run

    if args.workers is not None and args.workers < 1:
        print("--workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, kind=args.command,
                          overrides={"seed": args.seed, "workers": args.workers})
    except ConfigError as err:
        print("\n".join(err.messages), file=sys.stderr)
        return EXIT_CONFIG
    try:
        result, out_dir = run(cfg, args.out)
    except Exception as err:   # reported, outputs already cleaned up
        print(f"{args.command} failed: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps({"experiment": cfg.experiment, "out": str(out_dir), "rows": len(result.rows),
                      "fingerprint": cfg.fingerprint()}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
