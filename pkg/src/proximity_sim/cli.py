"""Command-line runner: figure-style experiments, sweeps, micro-world runs.

    proximity-sim epidemic        [--config PATH] [--seed N] [--out DIR] [--band]
    proximity-sim sweep           --sweep KEY=V1,V2,... [--config PATH] [--seed N] [--out DIR]
    proximity-sim world           [--config PATH] [--seed N] [--out DIR]
    proximity-sim crypto-selftest [--seed N]

Exit codes: 0 success, 1 configuration problem, 2 runtime abort (activity
cap exceeded).  Outputs are byte-deterministic for identical inputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import crypto
from .config import ParseError, RunConfig, ValidationError, parse_config, parse_sweep_axis
from .epidemic import AbortCapExceeded, run_ensemble
from .report import emit_csv, emit_svg
from .world import World, false_alert_rate, parse_contact_trace, EmptyLog

__all__ = ["main", "run_command"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proximity-sim",
        description="contact-tracing protocol and outbreak co-simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("epidemic", "sweep", "world", "crypto-selftest"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", type=Path, default=None)
        cmd.add_argument("--seed", type=int, default=42)
        cmd.add_argument("--out", type=Path, default=Path("out"))
        if name == "epidemic":
            cmd.add_argument(
                "--band",
                action="store_true",
                help="shade the gap between baseline and intervention",
            )
        if name == "sweep":
            cmd.add_argument("--sweep", required=True, metavar="KEY=V1,V2,...")
    return parser


def _load_config(args: argparse.Namespace) -> RunConfig:
    text = args.config.read_text() if args.config else ""
    return parse_config(text, command=args.command)


def _run_epidemic(args: argparse.Namespace) -> int:
    run = _load_config(args)
    params = run.sim_params
    baseline = run_ensemble(params.without_app(), args.seed)
    app = run_ensemble(params, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    length = min(len(baseline.mean), len(app.mean))
    series = [
        ("baseline", baseline.mean[:length]),
        (f"app(efficiency={params.efficiency})", app.mean[:length]),
    ]
    emit_csv(series, args.out / "daily_new_infected.csv")
    emit_svg(
        series,
        args.out / "daily_new_infected.svg",
        band=(series[0][0], series[1][0]) if args.band else None,
    )
    last_day = length - 1
    base_total, _ = baseline.cumulative_stats(last_day)
    app_total, _ = app.cumulative_stats(last_day)
    print(f"cumulative at day {last_day}: "
          f"baseline {base_total:.1f}, app {app_total:.1f}")
    if baseline.truncated or app.truncated:
        aborted = sorted(set(baseline.aborted_replicates + app.aborted_replicates))
        print(f"runtime abort: activity cap hit in replicates {aborted}", file=sys.stderr)
        return 2
    return 0


def _run_sweep(args: argparse.Namespace) -> int:
    run = _load_config(args)
    key, values = parse_sweep_axis(args.sweep)
    params = run.sim_params
    args.out.mkdir(parents=True, exist_ok=True)
    ensembles = [("baseline", run_ensemble(params.without_app(), args.seed))]
    for value in values:
        try:
            point = replace(params, **{key: value})
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
        ensembles.append((f"{key}={value}", run_ensemble(point, args.seed)))
    truncated = any(e.truncated for _, e in ensembles)
    length = min(len(e.mean) for _, e in ensembles)
    last_day = length - 1
    series = [(label, e.mean[:length]) for label, e in ensembles]
    summary = [(label,) + e.cumulative_stats(last_day) for label, e in ensembles]
    emit_csv(series, args.out / "sweep_series.csv")
    emit_svg(series, args.out / "sweep_series.svg", title=f"sweep over {key}")
    lines = ["label,cumulative_mean,cumulative_se"]
    lines += [f"{label},{mean:.6f},{se:.6f}" for label, mean, se in summary]
    (args.out / "sweep_summary.csv").write_text("\n".join(lines) + "\n", newline="\n")
    for label, mean, _ in summary:
        print(f"{label}: cumulative at day {last_day} = {mean:.1f}")
    if truncated:
        print("runtime abort: activity cap hit during sweep", file=sys.stderr)
        return 2
    return 0


def _run_world(args: argparse.Namespace) -> int:
    run = _load_config(args)
    trace = None
    if run.trace_file:
        trace = parse_contact_trace(Path(run.trace_file).read_text())
    world = World(run.world_config, seed=args.seed, trace=trace)
    world.run()
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "events.jsonl", "w", newline="\n") as handle:
        for event in world.events:
            handle.write(json.dumps(event, sort_keys=True) + "\n")
    with open(args.out / "bus_trace.jsonl", "w", newline="\n") as handle:
        bus_kinds = {
            "key_request": "KEY_REQUEST",
            "key_issued": "KEY_ISSUE",
            "upload": "ALERT_UPLOAD",
            "notify": "NOTIFY",
            "waitlist_release": "WAITLIST_RELEASE",
        }
        for event in world.events:
            kind = bus_kinds.get(event["type"])
            if kind is None:
                continue
            record = {"message": kind}
            record.update(
                (k, v) for k, v in event.items() if k != "type"
            )
            handle.write(json.dumps(record, sort_keys=True) + "\n")
    dispatches = [e for e in world.events if e["type"] == "dispatch"]
    lines = ["t,uploader,recipient,level,score,status,origin_tag"]
    lines += [
        f"{d['t']},{d['uploader']},{d['recipient']},{d['level']},"
        f"{d['score']:.6f},{d['status']},{d['origin_tag']}"
        for d in dispatches
    ]
    (args.out / "dispatch_log.csv").write_text("\n".join(lines) + "\n", newline="\n")
    with open(args.out / "devices.jsonl", "w", newline="\n") as handle:
        for snapshot in world.device_snapshots():
            handle.write(json.dumps(snapshot, sort_keys=True) + "\n")
    summary = world.summary()
    try:
        rate = false_alert_rate(world.events, run.world_config.infection_range)
        report = f"red_notifications_false_alert_rate={rate:.6f}"
    except EmptyLog:
        report = "red_notifications_false_alert_rate=n/a (no red notifications)"
    report_lines = [f"{k}={v}" for k, v in summary.items()] + [report]
    (args.out / "false_alert_report.txt").write_text(
        "\n".join(report_lines) + "\n", newline="\n"
    )
    for line in report_lines:
        print(line)
    return 0


def _run_crypto_selftest(args: argparse.Namespace) -> int:
    failures = 0

    def check(label: str, ok: bool) -> None:
        nonlocal failures
        print(f"{'ok  ' if ok else 'FAIL'} {label}")
        failures += 0 if ok else 1

    pair = crypto.keypair_from_primes(61, 53, e=17)
    toy = crypto.encrypt(pair.public, 65)
    check(
        "toy vector 65 -> 2790 -> 65",
        toy.ciphertext == 2790 and crypto.decrypt(pair, toy) == 65,
    )
    check(
        "toy key is (n=3233, e=17, d=2753)",
        (pair.public.modulus, pair.public.exponent, pair.secret.exponent)
        == (3233, 17, 2753),
    )
    ok = True
    for index in range(5):
        test_pair = crypto.generate_keypair(crypto.derive_seed(args.seed, index), 32)
        for m in range(0, 200, 7):
            envelope = crypto.encrypt(test_pair.public, m)
            if crypto.decrypt(test_pair, envelope) != m:
                ok = False
    check("round trips across 5 generated keypairs", ok)
    number = "+393331234567"
    check(
        "contact packing round trip",
        crypto.decode_contact(crypto.encode_contact(number)) == number,
    )
    digest = crypto.keyed_digest(b"key", b"message")
    check("keyed digest is 256-bit", len(digest) == 32)
    return 1 if failures else 0


def run_command(argv: list[str] | None = None) -> int:
    """Entry point returning the process exit code."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "epidemic": _run_epidemic,
        "sweep": _run_sweep,
        "world": _run_world,
        "crypto-selftest": _run_crypto_selftest,
    }
    try:
        return handlers[args.command](args)
    except (ParseError, ValidationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except AbortCapExceeded as exc:
        print(f"runtime abort: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
