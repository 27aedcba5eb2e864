"""Command-line entry points: simulate, sweep and replay.

This module owns all file I/O. Telemetry is comma-separated with one row
per (optionally decimated) grid point; metric columns are always computed
from the full-rate stream so decimation never changes their values.
Floats are written with ``repr`` so files are byte-stable across runs and
round-trip exactly through replay.

Exit codes: 0 success, 2 parse failure, 3 validation failure, 4 runtime
failure (including a mid-run voltage collapse).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from .errors import (DcresError, NonMonotoneTime, ParseError,
                     ValidationError)
from .metrics import MetricConfig, score_trace
from .scenario import (Scenario, apply_override, load_scenario,
                       scenario_digest, serialize_scenario)
from .sim import collect

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4


@dataclass(frozen=True)
class RunOutputs:
    telemetry_path: str
    reports_path: str
    summary: str


def _g(x) -> str:
    """Fixed 9-significant-digit rendering for summary text."""
    return f"{x:.9g}"


def _report_dict(r) -> dict:
    return {"t_d": r.t_d, "t_r": r.t_r, "t_pr": r.t_pr, "v_pe": r.v_pe,
            "delta_rv": r.delta_rv, "vdi_peak": r.vdi_peak, "vrei": r.vrei,
            "resolved": r.resolved}


def _write_reports(path: str, digest_key: str, digest: str, v_ref: float,
                   reports) -> None:
    doc = {digest_key: digest, "v_ref": v_ref,
           "reports": [_report_dict(r) for r in reports]}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _summarize(reports, rv_final: float) -> str:
    lines = [f"events completed: {sum(1 for r in reports if r.resolved)}"
             f" of {len(reports)}",
             f"rv final: {_g(rv_final)} V*s"]
    for n, r in enumerate(reports, 1):
        if r.resolved:
            lines.append(
                f"event {n}: t_d={_g(r.t_d)} t_r={_g(r.t_r)} "
                f"t_pr={_g(r.t_pr)} v_pe={_g(r.v_pe)} "
                f"delta_rv={_g(r.delta_rv)} vdi_peak={_g(r.vdi_peak)} "
                f"vrei={_g(r.vrei)}")
        else:
            t_r = "-" if r.t_r is None else _g(r.t_r)
            v_pe = "-" if r.v_pe is None else _g(r.v_pe)
            lines.append(
                f"event {n}: UNRESOLVED t_d={_g(r.t_d)} t_r={t_r} "
                f"t_pr=- v_pe={v_pe} vdi_peak={_g(r.vdi_peak)}")
    return "\n".join(lines)


def _execute(scn: Scenario, out_dir: str) -> RunOutputs:
    """Run one scenario end to end and write telemetry + reports."""
    os.makedirs(out_dir, exist_ok=True)
    trace = collect(scn)
    rv, vdi, vrei, phase, reports = score_trace(
        trace.t, trace.v_t, scn.params.v_ref, scn.metrics)

    tele_path = os.path.join(out_dir, "telemetry.csv")
    units = scn.params.units
    header = (["t", "v_t"] + [f"i_{u.id}" for u in units]
              + ["p_cpl", "p_ppl", "rv", "vdi", "vrei", "phase"])
    rows = [",".join(header)]
    n = trace.t.size
    for k in range(0, n, scn.decimate):
        cells = [repr(trace.t[k].item()), repr(trace.v_t[k].item())]
        cells += [repr(x.item()) for x in trace.i[k]]
        cells += [repr(trace.p_cpl[k].item()), repr(trace.p_ppl[k].item()),
                  repr(rv[k].item()), repr(vdi[k].item()),
                  repr(vrei[k].item()), str(int(phase[k]))]
        rows.append(",".join(cells))
    with open(tele_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")

    reports_path = os.path.join(out_dir, "reports.json")
    _write_reports(reports_path, "scenario_digest", scenario_digest(scn),
                   scn.params.v_ref, reports)
    return RunOutputs(tele_path, reports_path,
                      _summarize(reports, float(rv[-1])))


def _load_with_overrides(scenario_path: str, overrides, dt=None,
                         decimate=None) -> Scenario:
    scn = load_scenario(scenario_path)
    if dt is not None:
        scn = apply_override(scn, "system.dt", dt)
    if decimate is not None:
        scn = apply_override(scn, "system.decimate", decimate)
    for item in overrides:
        if "=" not in item:
            raise ParseError(f"--set expects key=value, got '{item}'")
        key, value = item.split("=", 1)
        scn = apply_override(scn, key.strip(), value.strip())
    return scn


def cmd_simulate(scenario_path: str, out_dir: str, overrides=(),
                 dt=None, decimate=None) -> RunOutputs:
    scn = _load_with_overrides(scenario_path, overrides, dt, decimate)
    return _execute(scn, out_dir)


def _sweep_worker(args):
    text, value, out_dir = args
    from .scenario import parse_scenario
    try:
        outputs = _execute(parse_scenario(text), out_dir)
    except DcresError as exc:
        return value, None, f"{type(exc).__name__}: {exc}"
    with open(outputs.reports_path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return value, doc["reports"], None


def cmd_sweep(scenario_path: str, out_dir: str, overrides=()):
    """Run one simulation per sweep value; failures do not stop the rest.

    Returns (summary_csv_path, summary_text, n_failed).
    """
    scn = _load_with_overrides(scenario_path, overrides)
    if scn.sweep is None:
        raise ValidationError(["scenario has no [sweep] section"])
    os.makedirs(out_dir, exist_ok=True)
    key = scn.sweep.path.split(".")[-1]
    base = replace(scn, sweep=None)

    jobs = []
    failed_early = []
    for value in scn.sweep.values:
        try:
            sub = apply_override(base, scn.sweep.path, value)
        except DcresError as exc:
            failed_early.append((value, None,
                                 f"{type(exc).__name__}: {exc}"))
            continue
        sub_dir = os.path.join(out_dir, f"{key}={value!r}")
        jobs.append((serialize_scenario(sub), value, sub_dir))

    results = []
    if len(jobs) > 1 and (os.cpu_count() or 1) > 1:
        try:
            with concurrent.futures.ProcessPoolExecutor(
                    max_workers=min(len(jobs), os.cpu_count())) as pool:
                results = list(pool.map(_sweep_worker, jobs))
        except (OSError, PermissionError):
            results = []
    if not results:
        results = [_sweep_worker(job) for job in jobs]
    results = failed_early + results
    results.sort(key=lambda item: list(scn.sweep.values).index(item[0]))

    head = [key, "v_pe", "dip_depth", "recovery_s", "vrei", "vdi_peak"]
    csv_rows = [",".join(head)]
    text_rows = ["  ".join(h.rjust(15) for h in head)]
    n_failed = 0
    v_ref = scn.params.v_ref
    for value, reports, err in results:
        if err is not None or not reports or not reports[0]["resolved"]:
            n_failed += 1
            text_rows.append(f"{_g(value).rjust(15)}  FAILED: "
                             f"{err or 'no completed event'}")
            continue
        r = reports[0]
        depth = abs(v_ref - r["v_pe"])
        rec = r["t_pr"] - r["t_r"]
        csv_rows.append(",".join(map(repr, (value, r["v_pe"], depth, rec,
                                            r["vrei"], r["vdi_peak"]))))
        text_rows.append("  ".join(_g(x).rjust(15)
                         for x in (value, r["v_pe"], depth, rec,
                                   r["vrei"], r["vdi_peak"])))
    summary_path = os.path.join(out_dir, "sweep_summary.csv")
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(csv_rows) + "\n")
    return summary_path, "\n".join(text_rows), n_failed


def read_trace(path: str):
    """Load a (t, v_t) trace from CSV; any extra columns are ignored."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise ParseError(f"cannot read trace '{path}': {exc}") from None
    if not lines:
        raise ValidationError([f"trace '{path}' is empty"])
    header = [c.strip() for c in lines[0].split(",")]
    try:
        t_col = header.index("t")
        v_col = header.index("v_t")
    except ValueError:
        raise ParseError(
            f"trace '{path}' needs 't' and 'v_t' columns, got {header}") from None
    if len(lines) == 1:
        raise ValidationError([f"trace '{path}' has a header but no rows"])
    t = np.empty(len(lines) - 1)
    v = np.empty(len(lines) - 1)
    for n, ln in enumerate(lines[1:]):
        cells = ln.split(",")
        try:
            t[n] = float(cells[t_col])
            v[n] = float(cells[v_col])
        except (ValueError, IndexError):
            raise ParseError(f"trace '{path}' row {n + 2}: bad row "
                             f"'{ln}'") from None
        if n > 0 and t[n] <= t[n - 1]:
            raise NonMonotoneTime(
                f"trace '{path}' row {n + 2}: t={t[n]!r} does not advance "
                f"past t={t[n - 1]!r}")
    return t, v


def cmd_replay(trace_path: str, v_ref: float, out_dir: str,
               overrides=()) -> RunOutputs:
    """Score a recorded voltage trace with the metric engine only."""
    cfg = MetricConfig()
    for item in overrides:
        if "=" not in item:
            raise ParseError(f"--set expects key=value, got '{item}'")
        key, value = item.split("=", 1)
        key = key.strip()
        if not key.startswith("metrics."):
            raise ParseError(
                f"replay only accepts metrics.* overrides, got '{key}'")
        field = key.split(".", 1)[1]
        if field not in ("deadband", "restore_band", "hold", "vdi_scale"):
            raise ParseError(f"unknown override path '{key}'")
        cfg = replace(cfg, **{field: float(value)})

    t, v = read_trace(trace_path)
    rv, vdi, vrei, phase, reports = score_trace(t, v, v_ref, cfg)

    os.makedirs(out_dir, exist_ok=True)
    tele_path = os.path.join(out_dir, "telemetry.csv")
    rows = ["t,v_t,rv,vdi,vrei,phase"]
    for k in range(t.size):
        rows.append(",".join((repr(t[k].item()), repr(v[k].item()),
                              repr(rv[k].item()), repr(vdi[k].item()),
                              repr(vrei[k].item()), str(int(phase[k])))))
    with open(tele_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")

    with open(trace_path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    reports_path = os.path.join(out_dir, "reports.json")
    _write_reports(reports_path, "trace_digest", digest, v_ref, reports)
    return RunOutputs(tele_path, reports_path,
                      _summarize(reports, float(rv[-1])))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dcres",
        description="MVDC microgrid simulation and bus-voltage resilience "
                    "metrics")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario end to end")
    sim.add_argument("--scenario", required=True, help="scenario TOML path")
    sim.add_argument("--out", default="out", help="output directory")
    sim.add_argument("--dt", type=float, default=None,
                     help="override the integration step (s)")
    sim.add_argument("--decimate", type=int, default=None,
                     help="telemetry decimation factor (file output only)")
    sim.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override any scenario field, e.g. system.c_eq=0.04")

    swp = sub.add_parser("sweep", help="run the scenario's parameter sweep")
    swp.add_argument("--scenario", required=True)
    swp.add_argument("--out", default="out")
    swp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")

    rep = sub.add_parser("replay", help="score a recorded (t, v_t) trace")
    rep.add_argument("--trace", required=True, help="CSV with t and v_t columns")
    rep.add_argument("--vref", type=float, default=6000.0,
                     help="reference voltage for the metrics (V)")
    rep.add_argument("--out", default="out")
    rep.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="metrics.* overrides only")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            outputs = cmd_simulate(args.scenario, args.out, args.set,
                                   args.dt, args.decimate)
            print(outputs.summary)
            print(f"telemetry: {outputs.telemetry_path}")
            print(f"reports:   {outputs.reports_path}")
        elif args.command == "sweep":
            summary_path, text, n_failed = cmd_sweep(args.scenario, args.out,
                                                     args.set)
            print(text)
            print(f"summary: {summary_path}")
            if n_failed:
                print(f"error: {n_failed} sweep value(s) failed",
                      file=sys.stderr)
                return EXIT_RUNTIME
        else:
            outputs = cmd_replay(args.trace, args.vref, args.out, args.set)
            print(outputs.summary)
            print(f"telemetry: {outputs.telemetry_path}")
            print(f"reports:   {outputs.reports_path}")
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        for v in exc.violations:
            print(f"error: {v}", file=sys.stderr)
        return EXIT_VALIDATION
    except DcresError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
