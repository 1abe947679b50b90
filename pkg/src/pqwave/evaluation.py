"""Stage-averaged error tables of estimated PQIs against a scenario oracle."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import PHASES, estimate
from .pipeline import DecompositionPlan, window_starts
from .pqi import PqiSeries, relative_error, single_phase_pqi, three_phase_pqi
from .synth import ScenarioSpec, TruthOracle, synthesize

SINGLE_STAGES = ((0.3, 0.5), (2.3, 2.5), (3.6, 3.8))
THREE_STAGES = ((0.4, 0.6), (2.1, 2.3), (3.1, 3.3))

ERROR_DEFINITION = "|mean(estimate) - mean(oracle)| / |mean(oracle)| * 100 over the stage; absolute difference where the oracle mean is 0"


def default_stages(spec: ScenarioSpec) -> tuple:
    return THREE_STAGES if spec.phases == 3 else SINGLE_STAGES


def split_records(spec: ScenarioSpec, records: dict):
    """``(v, i)`` in the form the estimators take."""
    if spec.phases == 3:
        return {p: records[f"v{p}"] for p in PHASES}, {p: records[f"i{p}"] for p in PHASES}
    return records["v"], records["i"]


def oracle_pqi(spec: ScenarioSpec, oracle: TruthOracle, times: np.ndarray | None = None) -> PqiSeries:
    """PQIs of the exact components, sampled at ``times`` (default: every sample)."""
    if times is None:
        sel = np.arange(oracle.times.size)
    else:
        sel = np.clip(np.rint(np.asarray(times) * spec.fs).astype(int), 0, oracle.times.size - 1)
    cut = lambda ch: {k: z[sel] for k, z in oracle.tracks(ch).items()}  # noqa: E731
    t = oracle.times[sel]
    if spec.phases == 3:
        res = three_phase_pqi({p: cut(f"v{p}") for p in PHASES}, {p: cut(f"i{p}") for p in PHASES}, times=t)
    else:
        res = single_phase_pqi(cut("v"), cut("i"), times=t)
    # the analytic phase slope is not trustworthy across steps; take the declared frequency
    values = dict(res.values)
    values["f1"] = oracle.frequency[sel]
    return PqiSeries(t, values, res.system)


def stage_errors(est: PqiSeries, truth: PqiSeries, stages) -> dict:
    """``name -> [(error, is_absolute), ...]`` per stage."""
    out = {}
    for name in est.names:
        if name not in truth.values:
            continue
        row = []
        for lo, hi in stages:
            e = est.mean_over(lo, hi)[name]
            t = truth.mean_over(lo, hi)[name]
            row.append(relative_error(e, t))
        out[name] = row
    return out


@dataclass
class RunReport:
    scenario: str
    seed: int
    snr_db: float | None
    stages: tuple
    errors: dict = field(default_factory=dict)  # method -> {pqi: [(err, is_abs)]}
    seconds_per_window: dict = field(default_factory=dict)  # method -> mean seconds
    config: dict = field(default_factory=dict)
    definition: str = ERROR_DEFINITION

    def dominance(self, method: str = "proposal") -> float:
        """Fraction of (PQI, stage, baseline) cells where ``method`` errs less."""
        wins = total = 0
        for other, table in self.errors.items():
            if other == method:
                continue
            for name, row in self.errors[method].items():
                for (a, _), (b, _) in zip(row, table.get(name, [])):
                    total += 1
                    wins += a < b
        return wins / total if total else float("nan")

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario, "seed": self.seed, "snr_db": self.snr_db,
            "stages": [list(s) for s in self.stages], "definition": self.definition,
            "errors": {
                m: {k: [{"error": float(e), "absolute": bool(a)} for e, a in row] for k, row in t.items()}
                for m, t in self.errors.items()
            },
            "seconds_per_window": self.seconds_per_window, "config": self.config,
        }


def run_benchmark(spec: ScenarioSpec, methods=("proposal", "stft", "fs-dwt"), stages=None,
                  repeats: int = 1) -> RunReport:
    """Error tables for each method and mean wall time per analysis window.

    Timing repeats the whole analysis ``repeats`` times and divides by the
    number of windows the method processes.
    """
    stages = tuple(stages or default_stages(spec))
    records, oracle = synthesize(spec)
    v, i = split_records(spec, records)
    truth = oracle_pqi(spec, oracle)
    n_ch = 6 if spec.phases == 3 else 2
    report = RunReport(spec.name, spec.seed, spec.snr_db, stages,
                       config={"fs": spec.fs, "duration": spec.duration, "methods": list(methods), "repeats": repeats})
    for m in methods:
        elapsed = []
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            est = estimate(m, v, i, spec.fs)
            elapsed.append(time.perf_counter() - t0)
        report.errors[m] = stage_errors(est, truth, stages)
        report.seconds_per_window[m] = float(np.mean(elapsed)) / (_windows(m, spec) * n_ch)
    return report


def _windows(method, spec):
    n = spec.n_samples
    if method == "stft":
        return max(1, n // int(round(0.2 * spec.fs)))
    return len(window_starts(n, DecompositionPlan.for_fs(spec.fs)))


__all__ = [
    "SINGLE_STAGES", "THREE_STAGES", "ERROR_DEFINITION", "RunReport", "default_stages", "split_records",
    "oracle_pqi", "stage_errors", "run_benchmark",
]
