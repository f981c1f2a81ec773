"""Command-line entry point.

    rcprop SUBCOMMAND [--config FILE] [--threads N] [--out DIR] [key=value ...]

Each run writes ``<table>.csv``, ``<subcommand>.json`` and
``<subcommand>.manifest`` into the output directory (plus the raw ensemble
for ``gamma-moments``).  The manifest is itself a config file: feeding it
back through ``--config`` reproduces every output byte for byte.  Exit
status is 0 on success, 2 for invalid configuration or arguments, 3 for
numerical failures; errors are printed to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from . import __version__
from .config import EXECUTION_ONLY, SUBCOMMANDS, ConfigError, build_config, validate
from .errors import InvalidArgumentError, RcpropError
from .io import schema, write_csv, write_ensemble, write_json
from .runs import RUNNERS

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rcprop", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"rcprop {__version__}")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", type=Path, help="key = value config file (or a manifest)")
    p.add_argument("--threads", type=int, help="worker threads, 0 = one per CPU")
    p.add_argument("--out", help="output directory (config key out_path)")
    p.add_argument("overrides", nargs="*", metavar="key=value")
    return p


def _origin(exc: BaseException) -> str:
    """Name of the innermost package module in the traceback."""
    module = getattr(exc, "module", "rcprop")
    if module != "rcprop":
        return module
    here = Path(__file__).parent
    for frame in reversed(traceback.extract_tb(exc.__traceback__)):
        path = Path(frame.filename)
        if path.parent == here:
            return path.stem
    return module


def _fail(code: int, payload: dict) -> int:
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def manifest_text(subcommand: str, cfg) -> str:
    head = (f"# {schema('manifest')}\n# version = {__version__}\n"
            f"# subcommand = {subcommand}\n")
    return head + cfg.to_text(exclude=EXECUTION_ONLY)


def main(argv=None) -> int:
    args = _parser().parse_intermixed_args(argv)
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            return _fail(EXIT_CONFIG, {"error": "config", "field": item,
                                       "message": "override must look like key=value"})
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if args.threads is not None:
        overrides["threads"] = str(args.threads)
    if args.out is not None:
        overrides["out_path"] = args.out
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else None
        cfg = build_config(text, overrides)
        validate(cfg, args.subcommand)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, {"error": "config", "field": exc.field, "message": exc.message})
    except OSError as exc:
        return _fail(EXIT_CONFIG, {"error": "config", "field": "config", "message": str(exc)})

    try:
        result = RUNNERS[args.subcommand](cfg)
    except InvalidArgumentError as exc:
        return _fail(EXIT_CONFIG, {"error": "invalid-argument", "module": _origin(exc),
                                   "message": str(exc)})
    except (RcpropError, ArithmeticError) as exc:
        return _fail(EXIT_NUMERICAL, {"error": "numerical", "module": _origin(exc),
                                      "message": str(exc)})

    out = Path(cfg.out_path)
    out.mkdir(parents=True, exist_ok=True)
    stem = args.subcommand.replace("-", "_")
    written = []
    for t in result.tables:
        written.append(write_csv(out / f"{t.stem}.csv", t.kind, t.header, t.rows))
    if result.ensemble is not None:
        ext = "bin" if cfg.out_format == "bin" else "csv"
        written.append(write_ensemble(out / f"ensemble.{ext}", result.ensemble, cfg.out_format))
    payload = {"subcommand": args.subcommand,
               "config": cfg.to_dict(exclude=EXECUTION_ONLY), **result.summary}
    written.append(write_json(out / f"{stem}.json", "summary", payload))
    manifest = out / f"{stem}.manifest"
    manifest.write_text(manifest_text(args.subcommand, cfg), encoding="utf-8")
    written.append(manifest)
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
