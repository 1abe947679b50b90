"""Reference estimators: windowed DFT with 5 Hz subgrouping, and the
conventional-wavelet path without interharmonic removal.

Both accept one record per channel: a 1-D array for single-phase input, or
``{"a": ..., "b": ..., "c": ...}`` mappings for three-phase input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filters import builtin_pair, design_daubechies
from .pipeline import NOMINAL_F1, DecompositionPlan, analyze_stream, stream_times
from .pqi import FUND, PqiSeries, single_phase_pqi, three_phase_pqi

PHASES = ("a", "b", "c")


@dataclass(frozen=True)
class BaselineConfig:
    method: str = "stft"  # "stft" | "fs-dwt"
    window_s: float = 0.2
    mother: int = 40
    max_harmonic: int = 50

    def __post_init__(self):
        if self.method not in ("stft", "fs-dwt"):
            raise ValueError(f"unknown baseline method {self.method!r}")
        if self.window_s <= 0:
            raise ValueError("window_s must be positive")


def _is_three(v):
    return isinstance(v, dict)


def subgroup_phasors(x: np.ndarray, fs: float, max_harmonic: int = 50) -> tuple[dict, float]:
    """Harmonic and centred interharmonic subgroups of one rectangular window.

    The window must span a whole number of nominal cycles so that bins fall
    on a 5 Hz (for 0.2 s) grid. A harmonic subgroup is the harmonic bin and
    its two neighbours; the interharmonic subgroup between harmonics ``h``
    and ``h+1`` is every bin in between except those neighbours. Each group
    is reported as one peak phasor: root-sum-square magnitude with the phase
    of its strongest bin. Returns ``(key -> phasor, fundamental bin Hz)``.
    """
    n = x.size
    df = fs / n
    per = NOMINAL_F1 / df
    if abs(per - round(per)) > 1e-9:
        raise ValueError(f"window of {n} samples is not a whole number of {NOMINAL_F1:g} Hz cycles")
    per = int(round(per))
    X = np.fft.rfft(x) * 2 / n
    X[0] /= 2
    top = min(max_harmonic, (X.size - 2) // per)
    out = {}

    def group(lo, hi):
        seg = X[lo:hi]
        mag = np.sqrt(np.sum(np.abs(seg) ** 2))
        return mag * np.exp(1j * np.angle(seg[np.argmax(np.abs(seg))])) if seg.size else 0j

    for h in range(1, top + 1):
        c = h * per
        out[("h", h)] = group(c - 1, c + 2)
        if h < top:
            out[("ih", (h + 0.5) * NOMINAL_F1)] = group(c + 2, c + per - 1)
    out[("ih", 0.5 * NOMINAL_F1)] = group(1, per - 1)
    fund = np.abs(X[per - 1 : per + 2])
    f1 = (per - 1 + int(np.argmax(fund))) * df if fund.max() > 0 else float("nan")
    return out, f1


def _windowed(records: dict, fs: float, cfg: BaselineConfig):
    n_win = int(round(cfg.window_s * fs))
    n = min(r.size for r in records.values())
    if n < n_win:
        raise ValueError(f"record of {n} samples is shorter than one {cfg.window_s} s window")
    starts = range(0, n - n_win + 1, n_win)
    per_ch = {ch: {} for ch in records}
    f1 = []
    for s in starts:
        for ch, r in records.items():
            groups, f = subgroup_phasors(np.asarray(r[s : s + n_win], dtype=float), fs, cfg.max_harmonic)
            for k, z in groups.items():
                per_ch[ch].setdefault(k, []).append(z)
            if ch == next(iter(records)):
                f1.append(f)
    arrays = {ch: {k: np.array(v) for k, v in m.items()} for ch, m in per_ch.items()}
    return arrays, np.array(f1), np.array(list(starts)), n_win


def stft_pqi(v, i, fs: float, cfg: BaselineConfig | None = None, hold: bool = False, neutral=None) -> PqiSeries:
    """PQIs from rectangular 0.2 s windows, one value per window.

    With ``hold`` the per-window values are repeated over every sample of
    their window (times are sample instants); otherwise ``times`` are the
    window start instants.
    """
    cfg = cfg or BaselineConfig("stft")
    if _is_three(v):
        recs = {("v", p): v[p] for p in PHASES} | {("i", p): i[p] for p in PHASES}
        if neutral is not None:
            recs["n"] = neutral
    else:
        recs = {"v": v, "i": i}
    arrays, f1, starts, n_win = _windowed(recs, fs, cfg)
    if _is_three(v):
        res = three_phase_pqi({p: arrays[("v", p)] for p in PHASES}, {p: arrays[("i", p)] for p in PHASES},
                              neutral=arrays.get("n"))
    else:
        res = single_phase_pqi(arrays["v"], arrays["i"])
    values = dict(res.values)
    values["f1"] = f1
    times = starts / fs
    if hold:
        values = {k: np.repeat(a, n_win) for k, a in values.items()}
        times = (starts[0] + np.arange(starts.size * n_win)) / fs
    return PqiSeries(times, values, res.system)


def fsdwt_pqi(v, i, fs: float, cfg: BaselineConfig | None = None, neutral=None) -> PqiSeries:
    """Conventional-pair harmonic path applied straight to the raw records."""
    cfg = cfg or BaselineConfig("fs-dwt")
    plan = DecompositionPlan.for_fs(fs)
    conv = builtin_pair("db40") if cfg.mother == 40 else design_daubechies(cfg.mother)
    pairs = (builtin_pair("paper"), conv)
    return _stream_pqi(v, i, plan, pairs, False, neutral)


def _stream_pqi(v, i, plan, pairs, stage1, neutral=None):
    first = v["a"] if _is_three(v) else v
    times = stream_times(np.asarray(first).size, plan)

    def run(x):
        tracks = analyze_stream(x, plan, pairs, stage1=stage1)
        if FUND not in tracks:  # silent channel
            tracks[FUND] = np.zeros(times.size, dtype=complex)
        return tracks

    if _is_three(v):
        tv = {p: run(v[p]) for p in PHASES}
        ti = {p: run(i[p]) for p in PHASES}
        tn = run(neutral) if neutral is not None else None
        return three_phase_pqi(tv, ti, tn, times=times, fs=plan.fs)
    tv, ti = run(v), run(i)
    return single_phase_pqi(tv, ti, times=times, fs=plan.fs)


def proposal_pqi(v, i, fs: float, pairs=None, neutral=None) -> PqiSeries:
    """Full two-stage pipeline followed by the PQI formulas."""
    return _stream_pqi(v, i, DecompositionPlan.for_fs(fs), pairs, True, neutral)


METHODS = ("proposal", "stft", "fs-dwt")


def estimate(method: str, v, i, fs: float, hold: bool = True, pairs=None, neutral=None) -> PqiSeries:
    """Dispatch to one estimator. ``pairs`` (stage-1, stage-2 filter pairs)
    applies to the wavelet methods; ``hold`` to the windowed DFT."""
    if method == "proposal":
        return proposal_pqi(v, i, fs, pairs, neutral)
    if method == "stft":
        return stft_pqi(v, i, fs, hold=hold, neutral=neutral)
    if method == "fs-dwt":
        if pairs is not None:
            return _stream_pqi(v, i, DecompositionPlan.for_fs(fs), pairs, False, neutral)
        return fsdwt_pqi(v, i, fs, neutral=neutral)
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


__all__ = ["BaselineConfig", "subgroup_phasors", "stft_pqi", "fsdwt_pqi", "proposal_pqi", "estimate", "METHODS"]
