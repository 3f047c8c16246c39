"""Command-line entry point.

Exit status: 0 success, 1 campaign aborted or journal incomplete, 2 usage or
configuration error. Diagnostics go to stderr; reports go to stdout and to
files in the output directory.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .controller import Campaign, JournalIncomplete
from .errors import CampaignAborted, ControllerError, IntegrityError, TripleAgentError, UsageError
from .report import Format, build_report, render

log = logging.getLogger("tripleagent")

STAGES = ("detect", "classify", "discover", "assess", "report", "run", "validate-config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tripleagent", description="Exception-injection resilience campaigns.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="campaign config file")
        if name == "validate-config":
            continue
        p.add_argument("--timeout-ms", type=int, help="per-execution timeout")
        p.add_argument("--filter", help="only methods whose name starts with this prefix")
        p.add_argument("--out", help="output directory (journal, experiments, reports)")
        p.add_argument("--parallel", type=int, help="worker processes (simulator backend only)")
        p.add_argument("--format", choices=[f.value for f in Format], default="human")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _campaign(cfg, replay_only: bool = False) -> Campaign:
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    return Campaign(
        cfg.build_target(),
        cfg.build_oracle(),
        filter_prefix=cfg.filter,
        timeout_ms=cfg.timeout_ms,
        journal=out / "journal.jsonl",
        experiments_dir=out / "experiments" if cfg.backend == "external" else None,
        parallel=cfg.parallelism,
        replay_only=replay_only,
    )


def _write_reports(cfg, report) -> None:
    for fmt, name in ((Format.HUMAN, "report.txt"), (Format.STRUCTURED, "report.json"), (Format.CSV_MATRIX, "matrix.csv")):
        (cfg.out / name).write_text(render(report, fmt))


def _run(args) -> int:
    overrides = {}
    if args.command != "validate-config":
        overrides = dict(
            timeout_ms=args.timeout_ms, filter=args.filter, output_dir=args.out, parallelism=args.parallel
        )
    cfg = load_config(args.config, **overrides)
    if args.command == "validate-config":
        cfg.build_target()
        cfg.build_oracle()
        print(f"{args.config}: ok", file=sys.stderr)
        return 0

    campaign = _campaign(cfg, replay_only=args.command == "report")
    st = campaign.state
    if args.command == "detect":
        campaign.detect_points()
        for p in st.points:
            print(f"{p.method} {p.location} {p.exception_type} reached={st.reach[p]}")
    elif args.command == "classify":
        cls = campaign.classify_points()
        for p, cat in sorted(cls.as_dict().items()):
            print(f"{p.method} {p.location} {p.exception_type} {cat.value}")
    elif args.command == "discover":
        for b in sorted(campaign.collect_candidates()):
            print(f"{b.point.method} {b.point.location} {b.point.exception_type} -> {b.handler}")
    elif args.command == "assess":
        for b, (achieved, status) in sorted(campaign.assess_candidates().items()):
            print(f"{b.point.method} {b.point.location} {b.point.exception_type} -> {b.handler} "
                  f"{achieved.value} {status.value}")
    else:
        campaign.run(overhead_runs=cfg.overhead_runs if args.command == "run" else 0)
        campaign.measure_overhead(0)
        report = build_report(st)
        _write_reports(cfg, report)
        sys.stdout.write(render(report, args.format))
    log.info("%d new workload execution(s)", campaign.executions)
    for w in st.warnings:
        log.warning(w)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("tripleagent: %(levelname)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO if getattr(args, "verbose", False) else logging.WARNING)
    log.propagate = False
    try:
        return _run(args)
    except (ConfigError, UsageError) as exc:
        print(f"tripleagent: error: {exc}", file=sys.stderr)
        return 2
    except IntegrityError as exc:
        print(f"tripleagent: error: {exc}", file=sys.stderr)
        for rec in exc.records:
            print(f"  {rec}", file=sys.stderr)
        return 1
    except (CampaignAborted, JournalIncomplete, ControllerError) as exc:
        print(f"tripleagent: aborted: {exc}", file=sys.stderr)
        return 1
    except TripleAgentError as exc:
        print(f"tripleagent: error: {exc}", file=sys.stderr)
        return 2
    finally:
        log.removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())
