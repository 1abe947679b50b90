"""Command-line entry point: ``pqwave design|synth|analyze|bench``.

Exit codes: 0 success, 1 usage, 2 data (unreadable input, unsupported
sample rate), 3 numeric failure (design or decomposition did not converge).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import filters
from .baselines import METHODS, estimate
from .errors import PqwaveError, WindowTooShort
from .evaluation import default_stages, oracle_pqi, run_benchmark
from .pipeline import DecompositionPlan
from .pqi import SINGLE_PHASE_PQIS, THREE_PHASE_PQIS, PqiSeries
from .synth import (
    CsvFormatError,
    builtin_scenarios,
    load_scenario,
    read_waveform_csv,
    sample_rate,
    save_scenario,
    synthesize,
    write_waveform_csv,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x) -> str:
    return repr(float(x))


def pqi_csv_text(series: PqiSeries) -> str:
    names = THREE_PHASE_PQIS if series.system == "three" else SINGLE_PHASE_PQIS
    names = [n for n in names if n in series.values]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_s", *names])
    cols = [np.asarray(series.values[n], dtype=float) for n in names]
    for k, t in enumerate(series.times):
        w.writerow([_fmt(t), *(_fmt(c[k]) for c in cols)])
    return buf.getvalue()


def _write_json(path, doc) -> None:
    filters.atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# design


def cmd_design(args) -> int:
    if args.paper == (args.db is not None):
        raise UsageError("choose exactly one of --paper or --db K")
    if args.paper:
        if args.N % 2 == 0:
            raise UsageError(f"N must be odd (got {args.N})")
        if not 0 < args.wp < 0.5:
            raise UsageError(f"wp must lie in (0, 0.5) (got {args.wp})")
        try:
            pair = filters.design_paper_pair(args.N, args.wp)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        if args.db < 1:
            raise UsageError("--db needs a positive vanishing-moment count")
        pair = filters.design_daubechies(args.db)
    filters.save_pair(pair, args.out)
    width = filters.transition_width_hz(pair, args.level, args.fs)
    print(f"wrote {args.out}: {pair.kind}, {pair.n_fb} taps")
    print(f"level-{args.level} transition width at fs={args.fs:g} Hz: {width:.3f} Hz (1% to 99%)")
    print(f"stopband ripple: {pair.stopband_ripple:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth


def _scenario(args):
    if args.scenario_file:
        try:
            spec = load_scenario(args.scenario_file)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise DataError(f"cannot read scenario file {args.scenario_file}: {exc}") from None
    else:
        table = builtin_scenarios()
        if args.scenario not in table:
            raise UsageError(f"unknown scenario {args.scenario!r}; built-ins: {', '.join(table)}")
        spec = table[args.scenario]
    snr = spec.snr_db
    if getattr(args, "snr", None) is not None:
        snr = None if args.snr.lower() == "none" else float(args.snr)
    seed = args.seed if args.seed is not None else spec.seed
    return spec.with_noise(snr, seed)


def cmd_synth(args) -> int:
    spec = _scenario(args)
    out = Path(args.out)
    records, oracle = synthesize(spec)
    write_waveform_csv(out / "wave.csv", oracle.times, records)
    save_scenario(spec, out / "scenario.json")
    filters.atomic_write_text(out / "oracle.csv", pqi_csv_text(oracle_pqi(spec, oracle)))
    print(f"wrote {out}/wave.csv ({spec.n_samples} samples at {spec.fs:g} Hz, {len(records)} channels), "
          f"scenario.json, oracle.csv")
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze


def _split_channels(channels: dict):
    if {"v", "i"} <= set(channels):
        return channels["v"], channels["i"], None
    three = [f"{k}{p}" for k in "vi" for p in "abc"]
    if set(three) <= set(channels):
        v = {p: channels[f"v{p}"] for p in "abc"}
        i = {p: channels[f"i{p}"] for p in "abc"}
        return v, i, channels.get("in")
    raise DataError(
        f"channel columns {sorted(channels)} not understood; expected v,i or va,vb,vc,ia,ib,ic[,in]"
    )


def _pairs(args):
    if not (args.stage1_filter or args.stage2_filter):
        return None
    try:
        p1 = filters.load_pair(args.stage1_filter) if args.stage1_filter else filters.builtin_pair("paper")
        p2 = filters.load_pair(args.stage2_filter) if args.stage2_filter else filters.builtin_pair("db40")
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read filter file: {exc}") from None
    return p1, p2


def cmd_analyze(args) -> int:
    try:
        times, channels = read_waveform_csv(args.input)
        fs = sample_rate(times)
    except OSError as exc:
        raise DataError(f"cannot read {args.input}: {exc}") from None
    except CsvFormatError as exc:
        raise DataError(str(exc)) from None
    v, i, neutral = _split_channels(channels)
    if args.method != "stft":
        try:
            DecompositionPlan.for_fs(fs)
        except ValueError as exc:
            raise DataError(str(exc)) from None
    t0 = time.perf_counter()
    try:
        series = estimate(args.method, v, i, fs, hold=False, pairs=_pairs(args), neutral=neutral)
    except (WindowTooShort, ValueError) as exc:
        raise DataError(str(exc)) from None
    elapsed = time.perf_counter() - t0
    series = PqiSeries(series.times + times[0], series.values, series.system)
    out = Path(args.out)
    filters.atomic_write_text(out / "pqi.csv", pqi_csv_text(series))
    summary = {
        "input": str(args.input),
        "method": args.method,
        "fs": fs,
        "system": series.system,
        "rows": int(series.times.size),
        "span_s": [float(series.times[0]), float(series.times[-1])],
        "mean": {k: float(np.nanmean(v)) if np.any(np.isfinite(v)) else None for k, v in series.values.items()},
        "seconds": elapsed,
    }
    _write_json(out / "summary.json", summary)
    print(f"wrote {out}/pqi.csv ({series.times.size} rows, {series.times[0]:.3f}-{series.times[-1]:.3f} s) "
          f"and summary.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def _stages(text):
    if not text:
        return None
    out = []
    for part in text.split(","):
        try:
            lo, hi = (float(x) for x in part.split(":"))
        except ValueError:
            raise UsageError(f"bad stage {part!r}; use start:end in seconds") from None
        if hi <= lo:
            raise UsageError(f"stage {part!r} ends before it starts")
        out.append((lo, hi))
    return tuple(out)


def error_table_text(report) -> str:
    methods = list(report.errors)
    lines = []
    head = f"{'PQI':8s}" + "".join(
        f" {m + ' ' + f'{lo:g}-{hi:g}s':>20s}" for m in methods for lo, hi in report.stages
    )
    lines.append(head)
    names = list(next(iter(report.errors.values())))
    for n in names:
        cells = []
        for m in methods:
            for e, absolute in report.errors[m][n]:
                cells.append(f" {e:19.4f}{'*' if absolute else '%'}")
        lines.append(f"{n:8s}" + "".join(cells))
    lines.append("error = " + report.definition + " (* marks absolute)")
    return "\n".join(lines)


def errors_csv_text(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "pqi", "stage_start_s", "stage_end_s", "error", "unit"])
    for m, table in report.errors.items():
        for n, row in table.items():
            for (lo, hi), (e, absolute) in zip(report.stages, row):
                w.writerow([m, n, _fmt(lo), _fmt(hi), _fmt(e), "absolute" if absolute else "percent"])
    return buf.getvalue()


def cmd_bench(args) -> int:
    spec = _scenario(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise UsageError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
    stages = _stages(args.stages) or default_stages(spec)
    report = run_benchmark(spec, methods, stages, repeats=args.repeats)
    print(f"scenario {spec.name}, seed {spec.seed}, SNR {spec.snr_db} dB")
    print(error_table_text(report))
    print(f"mean seconds per window per channel over {args.repeats} run(s):")
    for m, s in report.seconds_per_window.items():
        print(f"  {m:9s} {s:.5f}")
    if len(methods) > 1 and "proposal" in methods:
        print(f"proposal better in {report.dominance():.1%} of (PQI, stage, baseline) cells")
    if args.out:
        out = Path(args.out)
        filters.atomic_write_text(out / "errors.csv", errors_csv_text(report))
        _write_json(out / "report.json", report.to_dict())
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pqwave", description="Instantaneous power quality indices via two-stage wavelet packets.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("design", help="design a filter pair and write its coefficient file")
    d.add_argument("--paper", action="store_true", help="narrow-transition CQMF pair from a half-band design")
    d.add_argument("--db", type=int, metavar="K", help="Daubechies pair with K vanishing moments")
    d.add_argument("--N", type=int, default=99, help="half-band length (odd, 3 mod 4)")
    d.add_argument("--wp", type=float, default=0.47, help="passband edge as a fraction of pi")
    d.add_argument("--level", type=int, default=5, help="level for the reported transition width")
    d.add_argument("--fs", type=float, default=1600.0, help="sample rate for the reported width")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_design)

    s = sub.add_parser("synth", help="synthesize a scenario's waveforms and oracle")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--scenario", help=f"built-in name ({', '.join(builtin_scenarios())})")
    g.add_argument("--scenario-file", help="scenario JSON file")
    s.add_argument("--seed", type=int)
    s.add_argument("--snr", help="SNR in dB, or 'none' for a noiseless record")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    a = sub.add_parser("analyze", help="estimate PQIs from a waveform CSV")
    a.add_argument("--in", dest="input", required=True, help="waveform CSV (time_s first)")
    a.add_argument("--method", choices=METHODS, default="proposal")
    a.add_argument("--stage1-filter", help="coefficient file for the stage-1 pair")
    a.add_argument("--stage2-filter", help="coefficient file for the stage-2 pair")
    a.add_argument("--out", required=True, help="output directory")
    a.set_defaults(func=cmd_analyze)

    b = sub.add_parser("bench", help="stage error tables and timing against the oracle")
    g = b.add_mutually_exclusive_group(required=True)
    g.add_argument("--scenario")
    g.add_argument("--scenario-file")
    b.add_argument("--methods", default=",".join(METHODS))
    b.add_argument("--stages", help="comma-separated start:end seconds")
    b.add_argument("--repeats", type=int, default=10, help="timing repetitions")
    b.add_argument("--seed", type=int)
    b.add_argument("--snr")
    b.add_argument("--out", help="directory for errors.csv and report.json")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pqwave {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"pqwave {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PqwaveError as exc:
        print(f"pqwave {args.command}: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
