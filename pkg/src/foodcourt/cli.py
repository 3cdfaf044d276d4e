"""Operator entry point.

Subcommands: run, resume, analyze, aggregate, validate, roster. Exit codes
are a stable contract: 0 success, 2 validation failure, 3 runtime abort.
Credentials come only from the environment (never flags); paths given on the
command line resolve against --workdir.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import (
    GATEWAY_CHOICES,
    SimConfig,
    bundled_path,
    config_from_dict,
    load_config,
    validate_config,
)
from .domain import build_units, load_roster
from .engine import Engine, parse_run_log, read_checkpoint, resume_engine, verify_log
from .errors import (
    CacheFormatError,
    CheckpointError,
    ConfigError,
    FoodcourtError,
    LogFormatError,
    RosterError,
)
from .gateway import Gateway, HttpTransport, RetryPolicy, read_cache
from .metrics import aggregate_reports, compute_report, write_aggregate, write_report
from .runtime import GatewayBackend, TemplateSet
from .scripted import ScriptedBackend, ScriptedPolicy, ScriptedTransport

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _workpath(args, value) -> Path:
    p = Path(value)
    if p.is_absolute():
        return p
    return (Path(args.workdir) / p).resolve()


def _build_backend(cfg: SimConfig, cache_path: Path | None):
    """Wire the agent backend and gateway for the configured mode."""
    mode = cfg.gateway_mode
    if mode == "scripted":
        policy = ScriptedPolicy.from_file(cfg.policy_path)
        return ScriptedBackend(policy), None

    gw = cfg.gateway
    retry = RetryPolicy(attempts=gw.retry_attempts, base=gw.retry_base,
                        cap=gw.retry_cap)
    if mode == "replay":
        if cache_path is None or not cache_path.exists():
            raise ConfigError([
                f"gateway.cache: replay mode needs an existing cache file "
                f"(got {cache_path})"])
        gateway = Gateway("replay", cache_path=cache_path,
                          request_cap=gw.request_cap, retry=retry)
    else:
        if gw.transport == "scripted":
            transport = ScriptedTransport(ScriptedPolicy.from_file(cfg.policy_path))
        else:
            api_key = os.environ.get(gw.api_key_env) or os.environ.get("OPENAI_API_KEY")
            transport = HttpTransport(gw.base_url, api_key=api_key)
        if mode == "record":
            if cache_path is None:
                raise ConfigError(["gateway.cache: record mode needs a cache path"])
            gateway = Gateway("record", transport=transport, cache_path=cache_path,
                              request_cap=gw.request_cap,
                              parallelism=gw.parallelism, rpm=gw.rpm, retry=retry)
        else:
            gateway = Gateway("live", transport=transport,
                              request_cap=gw.request_cap,
                              parallelism=gw.parallelism, rpm=gw.rpm, retry=retry)
    backend = GatewayBackend(gateway, gw.model, temperature=gw.temperature,
                             max_tokens=gw.max_tokens)
    return backend, gateway


def _run_summary(engine: Engine, cause, log_path) -> str:
    funds = ", ".join(f"{rid}={st.funds}" for rid, st in
                      sorted(engine.restaurants.items()))
    return (f"days={engine.days_completed} cause={cause or 'paused'} "
            f"funds: {funds} log: {log_path}")


def cmd_run(args) -> int:
    config_path = _workpath(args, args.config) if args.config else bundled_path(
        "default_config.yaml")
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        for finding in exc.findings:
            print(finding, file=sys.stderr)
        return EXIT_VALIDATION
    cfg = cfg.with_overrides(seed=args.seed, mode=args.mode,
                             gateway_mode=args.gateway, horizon=args.horizon,
                             workers=args.workers)
    findings = validate_config(cfg)
    if findings:
        for finding in findings:
            print(finding, file=sys.stderr)
        return EXIT_VALIDATION

    log_path = _workpath(args, args.log)
    if log_path.exists() and not args.force:
        print(f"refusing to overwrite existing log {log_path} (use --force)",
              file=sys.stderr)
        return EXIT_VALIDATION
    cache_path = _workpath(args, args.cache) if args.cache else None
    if cfg.gateway_mode == "record":
        if cache_path is None:
            cache_path = log_path.with_suffix(".cache")
        if cache_path.exists():
            if not args.force:
                print(f"refusing to overwrite existing cache {cache_path} "
                      f"(use --force)", file=sys.stderr)
                return EXIT_VALIDATION
            cache_path.unlink()
    checkpoint_path = _workpath(args, args.checkpoint) if args.checkpoint else None
    if args.stop_after_day and checkpoint_path is None:
        checkpoint_path = log_path.with_suffix(".ckpt")

    try:
        backend, gateway = _build_backend(cfg, cache_path)
        engine = Engine(cfg, backend, gateway=gateway, log_path=log_path)
        cause = engine.run(stop_after_day=args.stop_after_day,
                           checkpoint_path=checkpoint_path)
    except (ConfigError, RosterError, CacheFormatError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except FoodcourtError as exc:
        print(f"runtime abort: {exc}", file=sys.stderr)
        print(f"partial log: {log_path}", file=sys.stderr)
        return EXIT_RUNTIME

    print(_run_summary(engine, cause, log_path))
    if cause is None and checkpoint_path:
        print(f"paused after day {engine.days_completed}; checkpoint: {checkpoint_path}")
    if cause == "request_cap":
        print(f"request cap reached; partial log: {log_path}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_resume(args) -> int:
    checkpoint_path = _workpath(args, args.checkpoint)
    log_path = _workpath(args, args.log)
    if log_path.exists() and not args.force:
        print(f"refusing to overwrite existing log {log_path} (use --force)",
              file=sys.stderr)
        return EXIT_VALIDATION
    try:
        payload = read_checkpoint(checkpoint_path)
    except CheckpointError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    try:
        cfg = config_from_dict(payload["config"])
        cache_path = _workpath(args, args.cache) if args.cache else None
        backend, gateway = _build_backend(cfg, cache_path)
        engine = resume_engine(payload, backend, gateway=gateway, log_path=log_path)
        next_checkpoint = (_workpath(args, args.checkpoint_out)
                           if args.checkpoint_out else checkpoint_path)
        cause = engine.run(stop_after_day=args.stop_after_day,
                           checkpoint_path=next_checkpoint)
    except (ConfigError, RosterError, CacheFormatError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except FoodcourtError as exc:
        print(f"runtime abort: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(_run_summary(engine, cause, log_path))
    if cause == "request_cap":
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_analyze(args) -> int:
    logs = [_workpath(args, p) for p in args.log]
    out_dir = _workpath(args, args.out) if args.out else None
    try:
        if args.aggregate or len(logs) > 1:
            result = aggregate_reports([str(p) for p in logs])
            paths = write_aggregate(result, out_dir or Path("aggregate_reports"))
        else:
            report = compute_report(str(logs[0]))
            target = out_dir or logs[0].with_name(logs[0].stem + "_reports")
            paths = write_report(report, target)
    except LogFormatError as exc:
        print(f"corrupt log: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, FoodcourtError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    for path in paths:
        print(path)
    return EXIT_OK


def cmd_aggregate(args) -> int:
    args.aggregate = True
    return cmd_analyze(args)


def cmd_validate(args) -> int:
    findings: list[str] = []
    config_path = _workpath(args, args.config) if args.config else bundled_path(
        "default_config.yaml")
    cfg = None
    try:
        cfg = load_config(config_path)
        findings.extend(validate_config(cfg))
    except ConfigError as exc:
        findings.extend(exc.findings)

    roster_path = (_workpath(args, args.roster) if args.roster
                   else cfg.roster_path if cfg else bundled_path("roster.yaml"))
    try:
        load_roster(roster_path)
    except (RosterError, OSError) as exc:
        findings.append(f"roster.invalid: {exc}")

    try:
        templates = TemplateSet()
        for name, variables in (
                ("restaurant_system", {"restaurant_name": "probe"}),
                ("customer_retry", {"diagnostics": "probe"})):
            templates.render(name, **variables)
    except FoodcourtError as exc:
        findings.append(f"templates.invalid: {exc}")

    if args.cache:
        try:
            read_cache(_workpath(args, args.cache))
        except (CacheFormatError, OSError) as exc:
            findings.append(f"cache.invalid: {exc}")

    if args.check_log:
        try:
            header, events = parse_run_log(str(_workpath(args, args.check_log)))
            findings.extend(verify_log(header, events))
        except LogFormatError as exc:
            findings.append(f"log.invalid: {exc}")

    if findings:
        for finding in findings:
            print(finding)
        return EXIT_VALIDATION
    print("clean")
    return EXIT_OK


def cmd_roster(args) -> int:
    roster_path = _workpath(args, args.roster) if args.roster else bundled_path(
        "roster.yaml")
    try:
        customers, groups = load_roster(roster_path)
    except (RosterError, OSError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    units = build_units(customers, groups, args.mode)
    if args.json:
        import json
        print(json.dumps({
            "customers": len(customers),
            "groups": {g.group_id: list(g.member_names) for g in groups},
            "mode": args.mode,
            "units": [{"id": u.unit_id, "kind": u.kind, "size": u.party_size}
                      for u in units],
        }, indent=2, sort_keys=True))
        return EXIT_OK
    by_type: dict[str, int] = {}
    for g in groups:
        by_type[g.group_type] = by_type.get(g.group_type, 0) + 1
    type_text = ", ".join(f"{n} {t}" for t, n in sorted(by_type.items()))
    individuals = sum(1 for u in units if u.kind == "individual")
    print(f"customers: {len(customers)}")
    print(f"groups: {len(groups)} ({type_text})")
    print(f"{args.mode} mode units: {len(units)} "
          f"({individuals} individual, {len(units) - individuals} group)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foodcourt",
        description="Two-restaurant town simulator and metrics pipeline.")
    parser.add_argument("--workdir", default=".",
                        help="base directory for relative paths")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a simulation")
    p.add_argument("--config", help="config file (default: bundled)")
    p.add_argument("--gateway", choices=GATEWAY_CHOICES,
                   help="agent backend mode")
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("single", "group"))
    p.add_argument("--horizon", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--log", default="run_log.ndjson", help="run log output path")
    p.add_argument("--cache", help="completion cache (record/replay modes)")
    p.add_argument("--checkpoint", help="write a checkpoint after every day")
    p.add_argument("--stop-after-day", type=int,
                   help="pause after this day (writes a checkpoint)")
    p.add_argument("--force", action="store_true",
                   help="overwrite an existing log")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("resume", help="continue a checkpointed run")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--log", required=True, help="full run log output path")
    p.add_argument("--cache", help="completion cache (record/replay modes)")
    p.add_argument("--checkpoint-out", help="where to keep checkpointing")
    p.add_argument("--stop-after-day", type=int)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_resume)

    p = sub.add_parser("analyze", help="compute metric reports from run logs")
    p.add_argument("--log", nargs="+", required=True)
    p.add_argument("--out", help="report output directory")
    p.add_argument("--aggregate", action="store_true",
                   help="aggregate across many logs")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("aggregate", help="aggregate metrics across many logs")
    p.add_argument("--log", nargs="+", required=True)
    p.add_argument("--out", help="report output directory")
    p.set_defaults(fn=cmd_aggregate)

    p = sub.add_parser("validate", help="check config, roster, templates, cache")
    p.add_argument("--config", help="config file (default: bundled)")
    p.add_argument("--roster", help="roster file override")
    p.add_argument("--cache", help="completion cache to check")
    p.add_argument("--check-log", help="run log to verify invariants on")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("roster", help="inspect a roster")
    p.add_argument("--roster", help="roster file (default: bundled)")
    p.add_argument("--mode", choices=("single", "group"), default="group")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_roster)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
