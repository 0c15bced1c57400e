"""Command line entry point.

Subcommands: simulate, analyze, compare, sweep.  Exit codes: 0 on
success, 2 for configuration errors, 3 for input-data errors.  The
default output directory comes from $VOLTESIM_OUT (falling back to
./voltesim_out).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from .codec import amr_wb
from .config import (PRESET_NAMES, load_config, load_preset,
                     scenario_from_dict, scenario_hash, scenario_to_dict)
from .io import (InputDataError, read_radio_trace_csv, read_report_json,
                 read_rtp_trace_csv, write_event_log_csv,
                 write_event_log_json, write_radio_trace_csv,
                 write_report_csv_tables, write_report_json,
                 write_rtp_trace_csv)
from .kpi import build_report
from .pipeline import ConfigError, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _default_out() -> str:
    return os.environ.get("VOLTESIM_OUT", "voltesim_out")


def _load_scenario(args):
    manifest = getattr(args, "from_manifest", None)
    sources = [bool(args.config), bool(args.preset), bool(manifest)]
    if sum(sources) != 1:
        raise ConfigError(
            "exactly one of --config, --preset or --from-manifest is required")
    if manifest:
        try:
            with open(manifest, "r", encoding="utf-8") as fh:
                data = json.load(fh)
            cfg = scenario_from_dict(data["scenario"])
        except FileNotFoundError:
            raise ConfigError(f"manifest not found: {manifest}")
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise InputDataError(f"{manifest}: not a run manifest ({exc})")
        if args.seed is not None:
            import dataclasses
            cfg = dataclasses.replace(cfg, seed=args.seed)
        return cfg, None
    if args.config:
        return load_config(args.config, seed_override=args.seed), args.config
    return load_preset(args.preset, seed_override=args.seed), None


def _write_manifest(out_dir: Path, cfg, config_path, outputs: list[Path]) -> Path:
    inputs = {}
    if config_path:
        inputs[str(config_path)] = _sha256(Path(config_path))
    if cfg.radio_trace_path:
        inputs[str(cfg.radio_trace_path)] = _sha256(Path(cfg.radio_trace_path))
    manifest = {
        "tool_version": __version__,
        "seed": cfg.seed,
        "config_sha256": scenario_hash(cfg),
        "scenario": scenario_to_dict(cfg),
        "inputs": inputs,
        "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
    }
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return path


def cmd_simulate(args) -> int:
    cfg, config_path = _load_scenario(args)
    log = run_scenario(cfg)
    report = build_report(log.packets, radio=log.radio, log=log,
                          codec=cfg.codec)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []

    p = out_dir / "rtp_trace.csv"
    write_rtp_trace_csv(p, log.packets)
    outputs.append(p)
    p = out_dir / "radio_trace.csv"
    write_radio_trace_csv(p, log.radio)
    outputs.append(p)
    if args.format == "json":
        p = out_dir / "events.json"
        write_event_log_json(p, log)
        outputs.append(p)
        p = out_dir / "report.json"
        write_report_json(p, report)
        outputs.append(p)
    else:
        p = out_dir / "events.csv"
        write_event_log_csv(p, log)
        outputs.append(p)
        outputs.extend(Path(x) for x in
                       write_report_csv_tables(out_dir, report))
    _write_manifest(out_dir, cfg, config_path, outputs)

    print(f"simulated {cfg.duration_ms:.0f} ms (seed {cfg.seed}): "
          f"{report.packets_sent} packets, "
          f"error rate {report.rtp_error_rate:.4f}, "
          f"mean jitter {report.jitter_avg_ms if report.jitter_avg_ms is None else round(report.jitter_avg_ms, 3)} ms")
    print(f"outputs in {out_dir}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    records = read_rtp_trace_csv(args.trace)
    radio = read_radio_trace_csv(args.radio) if args.radio else None
    payload = records[0].payload_bytes if records else 33
    codec = amr_wb(23.85) if payload > 45 else amr_wb(12.65)
    report = build_report(records, radio=radio, codec=codec)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        write_report_json(out_dir / "report.json", report)
    else:
        write_report_csv_tables(out_dir, report)
    print(f"analyzed {len(records)} packets: "
          f"error rate {report.rtp_error_rate:.4f}, "
          f"mean jitter {report.jitter_avg_ms if report.jitter_avg_ms is None else round(report.jitter_avg_ms, 3)} ms")
    print(f"report in {out_dir}")
    return EXIT_OK


def cmd_compare(args) -> int:
    a = read_report_json(args.report_a)
    b = read_report_json(args.report_b)
    if a.get("schema_version") != b.get("schema_version"):
        raise InputDataError(
            f"schema version mismatch: {a.get('schema_version')} vs "
            f"{b.get('schema_version')}")

    def scalars(report: dict) -> dict:
        out = {k: x for k, x in report.items()
               if isinstance(x, (int, float)) and not isinstance(x, bool)}
        for k, x in (report.get("scheduler") or {}).items():
            if isinstance(x, (int, float)) and not isinstance(x, bool):
                out[f"scheduler.{k}"] = x
        return out

    sa, sb = scalars(a), scalars(b)
    rows = []
    for k in sorted(set(sa) & set(sb)):
        va, vb = sa[k], sb[k]
        delta = vb - va
        verdict = "A<B" if delta > 0 else ("A>B" if delta < 0 else "A=B")
        rows.append((k, va, vb, delta, verdict))
    width = max(len(r[0]) for r in rows) if rows else 10
    print(f"{'kpi':<{width}}  {'A':>12}  {'B':>12}  {'B-A':>12}  verdict")
    for k, va, vb, delta, verdict in rows:
        print(f"{k:<{width}}  {va:>12.6g}  {vb:>12.6g}  {delta:>12.6g}  {verdict}")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        payload = {k: {"a": va, "b": vb, "delta": d, "verdict": v}
                   for k, va, vb, d, v in rows}
        with open(out_dir / "compare.json", "w", encoding="utf-8",
                  newline="\n") as fh:
            json.dump(payload, fh, sort_keys=True, indent=1)
            fh.write("\n")
    return EXIT_OK


def _sweep_one(spec: tuple) -> dict:
    preset, config, seed, out_dir, fmt = spec
    ns = argparse.Namespace(preset=preset, config=config, seed=seed,
                            out=out_dir, format=fmt)
    cmd_simulate(ns)
    report = read_report_json(Path(out_dir) / "report.json") \
        if fmt == "json" else None
    row = {"seed": seed, "out": out_dir}
    if report:
        row.update({
            "rtp_error_rate": report["rtp_error_rate"],
            "jitter_avg_ms": report["jitter_avg_ms"],
            "mos_estimate": report["mos_estimate"],
        })
    return row


def cmd_sweep(args) -> int:
    # validate the scenario once before fanning out
    _load_scenario(argparse.Namespace(config=args.config, preset=args.preset,
                                      seed=None))
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    specs = [(args.preset, args.config, seed,
              str(out_root / f"seed_{seed:04d}"), args.format)
             for seed in range(args.seeds)]
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_sweep_one, specs))
    else:
        rows = [_sweep_one(s) for s in specs]
    rows.sort(key=lambda r: r["seed"])
    keys = ["seed", "rtp_error_rate", "jitter_avg_ms", "mos_estimate", "out"]
    with open(out_root / "sweep_summary.csv", "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(",".join(keys) + "\n")
        for row in rows:
            fh.write(",".join(str(row.get(k, "")) for k in keys) + "\n")
    print(f"swept {args.seeds} seeds into {out_root}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voltesim",
        description="VoLTE link-layer simulator and RTP KPI analyzer")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario")
    sim.add_argument("--config", help="scenario INI file")
    sim.add_argument("--preset", choices=PRESET_NAMES,
                     help="bundled scenario name")
    sim.add_argument("--from-manifest", dest="from_manifest",
                     help="re-run the exact scenario recorded in a manifest")
    sim.add_argument("--seed", type=int, default=None,
                     help="override the scenario seed")
    sim.add_argument("--out", default=_default_out(), help="output directory")
    sim.add_argument("--format", choices=("json", "csv"), default="json")
    sim.set_defaults(func=cmd_simulate)

    ana = sub.add_parser("analyze", help="compute KPIs for an RTP trace CSV")
    ana.add_argument("trace", help="RTP trace CSV path")
    ana.add_argument("--radio", default=None, help="radio trace CSV path")
    ana.add_argument("--out", default=_default_out(), help="output directory")
    ana.add_argument("--format", choices=("json", "csv"), default="json")
    ana.set_defaults(func=cmd_analyze)

    cmp_ = sub.add_parser("compare", help="diff two KPI report JSON files")
    cmp_.add_argument("report_a")
    cmp_.add_argument("report_b")
    cmp_.add_argument("--out", default=None)
    cmp_.set_defaults(func=cmd_compare)

    sw = sub.add_parser("sweep", help="run a scenario across many seeds")
    sw.add_argument("--config", help="scenario INI file")
    sw.add_argument("--preset", choices=PRESET_NAMES)
    sw.add_argument("--seeds", type=int, default=20,
                    help="number of seeds (0..N-1)")
    sw.add_argument("--jobs", type=int, default=1,
                    help="parallel worker processes")
    sw.add_argument("--out", default=_default_out())
    sw.add_argument("--format", choices=("json", "csv"), default="json")
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputDataError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"input error: missing file: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
