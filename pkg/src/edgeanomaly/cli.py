"""Command-line entry point: ``edgeanomaly generate | analyze | validate``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .analysis import AnalysisError, analyze, audit_labels
from .config import (
    BUILTIN_CONFIGS,
    ConfigError,
    GenerationConfig,
    builtin_config_text,
    parse_config,
    with_seed,
)
from .dataset import DatasetError, DatasetHandle
from .orchestrator import CorpusError, run_corpus

EXIT_OK, EXIT_FINDINGS, EXIT_ERROR = 0, 1, 2
SEED_ENV = "EAF_SEED"
BUILTIN_PREFIX = "builtin:"

log = logging.getLogger("edgeanomaly")


class UsageError(Exception):
    pass


def _env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _config_sources(specs: list[str]) -> list[tuple[str, str]]:
    """(label, text) for each --config value; ``builtin:NAME`` and ``builtin:all`` read bundled files."""
    out = []
    for spec in specs:
        if spec.startswith(BUILTIN_PREFIX):
            name = spec[len(BUILTIN_PREFIX):]
            names = BUILTIN_CONFIGS if name == "all" else (name,)
            out += [(f"{BUILTIN_PREFIX}{n}", builtin_config_text(n)) for n in names]
        else:
            try:
                out.append((spec, Path(spec).read_text(encoding="utf-8")))
            except OSError as exc:
                raise UsageError(f"{spec}: {exc.strerror or exc}") from None
    return out


def _load(specs: list[str], seed: int | None) -> list[GenerationConfig]:
    default = _env_seed()
    cfgs = []
    for label, text in _config_sources(specs):
        try:
            cfg = parse_config(text, default_seed=default)
        except ConfigError as exc:
            raise ConfigError(f"{label}: {exc}", exc.findings) from None
        cfgs.append(with_seed(cfg, seed) if seed is not None else cfg)
    return cfgs


def cmd_generate(args) -> int:
    cfgs = _load(args.config, args.seed)
    try:
        handles = run_corpus(cfgs, args.out, args.threads)
    except CorpusError as exc:
        for h in exc.handles:
            print(h.root)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for root in dict.fromkeys(str(h.root) for h in handles):
        print(root)
    return EXIT_OK


def cmd_analyze(args) -> int:
    ds = DatasetHandle.load(args.dataset)
    report = analyze(ds)
    report.write(args.report)
    log.info("wrote %s", args.report)
    if args.plots:
        from .plots import render

        plot_dir = Path(args.report).parent / "plots"
        for p in render(report, ds, plot_dir):
            log.info("wrote %s", p)
    if args.summary:
        sys.stdout.write(report.summary())
    else:
        print(f"anomaly_ratio: {report.anomaly_ratio:.4f}")
        for k, v in report.verdicts.items():
            print(f"{k}: {'yes' if v else 'no'}")
    if args.audit:
        problems = audit_labels(ds)
        for p in problems:
            print(f"label mismatch: {p}")
        print(f"label audit: {len(problems)} mismatch(es)")
        if problems:
            return EXIT_FINDINGS
    return EXIT_OK


def cmd_validate(args) -> int:
    status = EXIT_OK
    default = _env_seed()
    for label, text in _config_sources(args.config):
        try:
            parse_config(text, default_seed=default)
        except ConfigError as exc:
            status = EXIT_FINDINGS
            if exc.findings:
                for f in exc.findings:
                    print(f"{label}: {f}")
            else:
                print(f"{label}: parse: {exc}")
        else:
            print(f"{label}: ok")
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgeanomaly", description="Generate and analyze labeled performance-anomaly datasets.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-q", "--quiet", action="store_true", help="only print errors to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate runs and write traces plus a manifest")
    g.add_argument("--config", action="append", required=True,
                   help=f"config file, or {BUILTIN_PREFIX}NAME / {BUILTIN_PREFIX}all (repeatable)")
    g.add_argument("--seed", type=int, help=f"overrides the config seed and ${SEED_ENV}")
    g.add_argument("--out", help="dataset root (default: each config's output dir)")
    g.add_argument("--threads", type=int, help="worker threads (default: available cores)")
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("analyze", help="write a quality report for a dataset")
    a.add_argument("dataset")
    a.add_argument("--report", required=True, help="JSON report path")
    a.add_argument("--plots", action="store_true", help="also write SVG figures next to the report")
    a.add_argument("--summary", action="store_true", help="print a plain-text summary")
    a.add_argument("--audit", action="store_true", help="re-check every label against the manifest schedule")
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("validate", help="check config files and list findings")
    v.add_argument("config", nargs="+")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
        force=True,
    )
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FINDINGS if exc.findings else EXIT_ERROR
    except (UsageError, DatasetError, AnalysisError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
