"""Command-line front door for simulation, sweeps, audits, and serving.

Exit codes are a stable contract for CI: 0 success/pass, 1 semantic
failure (a bound audit or rule check failed, a replay diverged), 2 usage
or I/O error. Human-readable summaries go to stdout; machine-readable
outputs only to files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .calibrator import audit_bounds, audits_pass
from .core import MalformedLog, RunLog
from .harness import (
    ConfigError,
    RunConfig,
    replay_run_log,
    run_stream,
    sweep,
    write_run_artifacts,
)
from .rules import EnumerationCap, check_dominance, rule_from_spec

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _default_out_dir() -> str:
    return os.environ.get("COLLABCAL_OUT_DIR", "runs")


def _cmd_simulate(args) -> int:
    try:
        config = RunConfig.from_file(args.config)
        if args.seed is not None:
            config.seed = args.seed
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    log, summary = run_stream(config)
    paths = write_run_artifacts(log, summary, args.out)
    print(f"simulated {summary.days} days "
          f"(epsilon={summary.epsilon}, delta={summary.delta}, eta={summary.eta})")
    print(f"  avg_ch={summary.avg_ch:.4f}  avg_comp={summary.avg_comp:.4f}  "
          f"tau={summary.final_tau:.4f}  lambda={summary.final_lambda:.4f}")
    print(f"  bound audit: {'pass' if summary.audit_passed else 'FAIL'}")
    for name, path in paths.items():
        print(f"  wrote {name}: {path}")
    return EXIT_OK if summary.audit_passed else EXIT_FAIL


def _cmd_sweep(args) -> int:
    try:
        config = RunConfig.from_file(args.config)
        if args.seed is not None:
            config.seed = args.seed
        results = sweep(config, jobs=args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = []
    all_pass = True
    for (eps, dlt), summaries in sorted(results.items()):
        cell = {
            "epsilon": eps,
            "delta": dlt,
            "runs": [s.to_dict() for s in summaries],
            "mean_gt_loss_rate": sum(s.gt_loss_rate for s in summaries) / len(summaries),
            "mean_gt_gain_rate": sum(s.gt_gain_rate for s in summaries) / len(summaries),
            "mean_avg_ch": sum(s.avg_ch for s in summaries) / len(summaries),
            "mean_avg_comp": sum(s.avg_comp for s in summaries) / len(summaries),
        }
        table.append(cell)
        all_pass = all_pass and all(s.audit_passed for s in summaries)
        print(f"cell eps={eps} delta={dlt}: "
              f"avg_ch={cell['mean_avg_ch']:.4f} avg_comp={cell['mean_avg_comp']:.4f} "
              f"gt_loss={cell['mean_gt_loss_rate']:.4f} gt_gain={cell['mean_gt_gain_rate']:.4f}")
    sweep_path = out / "sweep.json"
    with sweep_path.open("w", encoding="utf-8") as fh:
        json.dump(table, fh, indent=2)
        fh.write("\n")
    print(f"wrote sweep table: {sweep_path}")
    return EXIT_OK if all_pass else EXIT_FAIL


def _cmd_audit(args) -> int:
    try:
        log = RunLog.read_jsonl(args.log)
    except (OSError, MalformedLog) as exc:
        print(f"cannot read log: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        audits = audit_bounds(log)
    except ValueError as exc:
        print(f"audit error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    ok = audits_pass(audits)
    if not audits:
        print("empty log: nothing to audit")
        return EXIT_OK
    final = audits[-1]
    print(f"audited {len(audits)} horizons: "
          f"avg_ch={final.avg_ch:.4f} (bound {final.bound_ch:.4f}), "
          f"avg_comp={final.avg_comp:.4f} (bound {final.bound_comp:.4f})")
    if ok:
        print("bound audit: pass at every horizon")
        return EXIT_OK
    first_bad = next(a for a in audits if not a.passed)
    print(f"bound audit: FAIL first at horizon {first_bad.horizon} "
          f"(avg_ch={first_bad.avg_ch:.4f} vs {first_bad.bound_ch:.4f}, "
          f"avg_comp={first_bad.avg_comp:.4f} vs {first_bad.bound_comp:.4f})")
    return EXIT_FAIL


def _cmd_check_rules(args) -> int:
    params = {}
    if args.params:
        try:
            params = json.loads(args.params)
        except json.JSONDecodeError as exc:
            print(f"bad --params JSON: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        rule = rule_from_spec({"kind": args.rule, **params})
    except (KeyError, TypeError) as exc:
        print(f"unknown rule: {exc}", file=sys.stderr)
        return EXIT_USAGE
    labels = list(range(args.labels))
    try:
        report = check_dominance(rule, labels, args.rounds,
                                 max_set_size=args.max_set_size, cap=args.cap)
    except EnumerationCap as exc:
        print(f"bounds too large: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"rule {rule!r}: {report.evaluations} checks over "
          f"|Y|={args.labels}, rounds<={args.rounds}")
    if report.holds:
        print("activation dominance holds (no counterexamples)")
        return EXIT_OK
    print(f"dominance VIOLATED: {len(report.counterexamples)} counterexamples; first:")
    print(json.dumps(report.counterexamples[0], indent=2, default=str))
    return EXIT_FAIL


def _cmd_replay(args) -> int:
    try:
        log = RunLog.read_jsonl(args.log)
    except (OSError, MalformedLog) as exc:
        print(f"cannot read log: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = replay_run_log(log)
    except (KeyError, ValueError) as exc:
        print(f"log incomplete for replay: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if report.ok:
        print(f"replayed {report.days_checked} days: thresholds and errors match")
        return EXIT_OK
    div = report.first_divergence
    print(f"replay DIVERGED at day {div['day_index']} on {div['field']}: "
          f"logged={div['logged']} recomputed={div['recomputed']}")
    return EXIT_FAIL


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    service_config = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                service_config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"cannot read service config: {exc}", file=sys.stderr)
            return EXIT_USAGE
    port = args.port or int(os.environ.get(
        "COLLABCAL_PORT", service_config.get("port", 8000)))
    data_dir = args.data_dir or os.environ.get(
        "COLLABCAL_DATA_DIR", service_config.get("data_dir", "collabcal-data"))
    app = create_app(
        data_dir=data_dir,
        day_timeout=service_config.get("day_timeout_seconds", 900.0),
        initial_streams=service_config.get("streams", []),
    )
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="collabcal",
        description="Online calibration of AI prediction sets for "
                    "multi-round human-AI collaboration.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one stream and write artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=_default_out_dir())
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("sweep", help="run a target grid of independent streams")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=_default_out_dir())
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("audit", help="check the error bound on a run log")
    p.add_argument("--log", required=True)
    p.set_defaults(fn=_cmd_audit)

    p = sub.add_parser("check-rules", help="exhaustive activation-dominance check")
    p.add_argument("--rule", required=True)
    p.add_argument("--params", default=None, help="rule parameters as JSON")
    p.add_argument("--labels", type=int, default=3)
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--max-set-size", type=int, default=None)
    p.add_argument("--cap", type=int, default=5_000_000)
    p.set_defaults(fn=_cmd_check_rules)

    p = sub.add_parser("replay", help="recompute a run log and verify it")
    p.add_argument("--log", required=True)
    p.set_defaults(fn=_cmd_replay)

    p = sub.add_parser("serve", help="run the live HTTP session service")
    p.add_argument("--config", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--data-dir", default=None)
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already; normalize other codes
        return int(exc.code) if exc.code else EXIT_OK
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
